"""
Experiment configuration
إعدادات التجارب - جدول الخيارات والتحقق من الأنواع والقيم

Every key is declared once in OPTIONS with a type, a default and a one-line
doc. Files are INI sections parsed with configparser; keys are case-sensitive.
"""

import configparser
import io
import logging
import os

from dimer_model import BoundaryCondition, ModelParams
from lattice import Rect
from model_errors import ConfigError, ModelError

logger = logging.getLogger(__name__)

OUTPUT_ENV = "HLDIMER_OUTPUT_DIR"
SECTIONS = ("model", "geometry", "sampler", "analysis", "sealing", "output")
INIT_CHOICES = ("empty", "packed_vertical", "packed_horizontal", "file")
FORMAT_CHOICES = ("csv", "jsonl", "json")


class ConfigOption:
    """خيار في جدول الإعدادات - One declared key"""

    def __init__(self, section, name, option_type, default, doc):
        self.section = section
        self.name = name
        self.option_type = option_type   # 'int', 'float', 'str', 'int_list', 'float_list', 'str_list'
        self.default = default
        self.doc = doc

    def __repr__(self):
        return f"ConfigOption([{self.section}] {self.name}: {self.option_type} = {self.default!r})"


class OptionTable:
    """جدول الخيارات - Declared keys grouped by section"""

    def __init__(self):
        self.sections = {name: {} for name in SECTIONS}

    def declare(self, section, name, option_type, default, doc):
        if section not in self.sections:
            raise ConfigError("unknown section", (section, None))
        if name in self.sections[section]:
            raise ConfigError("key declared twice", (section, name))
        self.sections[section][name] = ConfigOption(section, name, option_type, default, doc)

    def lookup(self, section, name):
        return self.sections.get(section, {}).get(name)

    def options(self):
        for section in SECTIONS:
            yield from self.sections[section].values()

    def help_text(self):
        """Every key with its type, default and doc, grouped by section"""
        lines = []
        for section in SECTIONS:
            lines.append(f"[{section}]")
            for opt in self.sections[section].values():
                lines.append(f"  {opt.name} ({opt.option_type}, default {OptionChecker.render(opt, opt.default)!r}): {opt.doc}")
        return "\n".join(lines)

    def __repr__(self):
        return "OptionTable(" + ", ".join(f"{s}: {len(v)}" for s, v in self.sections.items()) + ")"


def _declare_all():
    table = OptionTable()
    d = table.declare
    # model
    d("model", "beta", "float", 1.0, "inverse temperature")
    d("model", "beta_ladder", "float_list", [], "inverse temperatures annealed through before beta")
    d("model", "anneal_sweeps", "int", 0, "sweeps spent at each beta_ladder step")
    d("model", "lambda", "float", 0.0, "dimer activity lambda")
    d("model", "a", "float", 1.0, "attraction between colinear dimers, a > 0")
    # geometry
    d("geometry", "W", "int", 8, "torus or window width")
    d("geometry", "H", "int", 8, "torus or window height")
    d("geometry", "bc", "str", "periodic", "periodic, vacant, or PRESCRIBED:px:py:dx/dy,...")
    # sampler
    d("sampler", "seed", "int", 1, "master seed")
    d("sampler", "sweeps", "int", 1000, "measurement sweeps after burn-in")
    d("sampler", "burn_in", "int", 100, "sweeps discarded before measuring")
    d("sampler", "measure_every", "int", 1, "sweeps between measurements")
    d("sampler", "init", "str", "empty", "empty, packed_vertical, packed_horizontal or file")
    d("sampler", "init_file", "str", "", "configuration file used when init = file")
    d("sampler", "moves", "str_list", ["flip"], "move types among flip, pivot, slide")
    d("sampler", "p_pivot", "float", 0.25, "pivot proposal probability when pivot moves are enabled")
    d("sampler", "p_slide", "float", 0.25, "slide proposal probability when slide moves are enabled")
    d("sampler", "check_every", "int", 0, "full hard-core check period in sweeps, 0 = final state only")
    d("sampler", "chains", "int", 1, "independent chains")
    d("sampler", "pairs", "int", 4, "independent pairs for disagreement runs")
    d("sampler", "snapshots", "int", 0, "configurations kept per chain for analysis, 0 = final only")
    # analysis
    d("analysis", "K", "int", 2, "grid scale along x")
    d("analysis", "L", "int", 2, "grid scale along y")
    d("analysis", "N", "int", 4, "proper-division margin, N > 2")
    d("analysis", "b_values", "int_list", [], "square grid scales swept by analyze, overrides K and L")
    d("analysis", "escape_distance", "int", 2, "sup-distance for escape probabilities")
    d("analysis", "enumerate_max_edges", "int", 40, "largest window enumerated exhaustively")
    d("analysis", "workers", "int", 1, "processes used for enumeration subtrees")
    # sealing
    d("sealing", "a_scale", "int", 1, "horizontal sealing scale")
    d("sealing", "c_scale", "int", 0, "vertical sealing scale, 0 = derived from ell0")
    d("sealing", "c_const", "float", 1.0, "constant c in c_scale = max(1, round(c * ell0 / N))")
    d("sealing", "N", "int", 4, "sealing rectangle multiplier, N > 2")
    # output
    d("output", "dir", "str", "", f"output directory, default ${OUTPUT_ENV} or ./hldimer-out")
    d("output", "formats", "str_list", ["csv", "jsonl"], "output formats among csv, jsonl, json")
    return table


OPTIONS = _declare_all()


class OptionChecker:
    """فاحص الأنواع - Coercion of raw strings to declared types"""

    @staticmethod
    def coerce(option, raw):
        kind = option.option_type
        text = raw.strip()
        try:
            if kind == "int":
                return int(text)
            if kind == "float":
                return float(text)
            if kind.endswith("_list"):
                items = [t.strip() for t in text.replace(";", ",").split(",") if t.strip()]
                base = {"int_list": int, "float_list": float, "str_list": str}[kind]
                return [base(t) for t in items]
            return text
        except ValueError:
            raise ConfigError(f"expected {kind}, got '{raw}'", (option.section, option.name))

    @staticmethod
    def render(option, value):
        if option.option_type.endswith("_list"):
            return ", ".join(str(v) for v in value)
        return str(value)


class ExperimentConfig:
    """الإعدادات المحلولة - Resolved values for every declared key"""

    def __init__(self, values=None):
        self.values = {section: {} for section in SECTIONS}
        for opt in OPTIONS.options():
            default = list(opt.default) if isinstance(opt.default, list) else opt.default
            self.values[opt.section][opt.name] = default
        for section, entries in (values or {}).items():
            for name, value in entries.items():
                self.set(section, name, value)

    def set(self, section, name, value):
        if OPTIONS.lookup(section, name) is None:
            raise ConfigError("unknown key", (section, name))
        self.values[section][name] = value

    def get(self, section, name):
        if OPTIONS.lookup(section, name) is None:
            raise ConfigError("unknown key", (section, name))
        return self.values[section][name]

    def __getitem__(self, section):
        return self.values[section]

    # ---------- domain objects ----------

    def params(self, beta=None):
        m = self.values["model"]
        return ModelParams(m["beta"] if beta is None else beta, m["lambda"], m["a"])

    def boundary(self):
        return BoundaryCondition.from_token(self.values["geometry"]["bc"])

    def window(self):
        g = self.values["geometry"]
        return Rect.anchored(0, 0, g["W"], g["H"])

    def move_probabilities(self):
        s = self.values["sampler"]
        p_pivot = s["p_pivot"] if "pivot" in s["moves"] else 0.0
        p_slide = s["p_slide"] if "slide" in s["moves"] else 0.0
        return p_pivot, p_slide

    def anneal(self):
        m = self.values["model"]
        return [(b, m["anneal_sweeps"]) for b in m["beta_ladder"]]

    def output_dir(self):
        configured = self.values["output"]["dir"]
        return configured or os.environ.get(OUTPUT_ENV) or os.path.join(os.getcwd(), "hldimer-out")

    # ---------- serialization ----------

    def to_ini(self):
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        for section in SECTIONS:
            parser[section] = {}
            for opt in OPTIONS.sections[section].values():
                parser[section][opt.name] = OptionChecker.render(opt, self.values[section][opt.name])
        buffer = io.StringIO()
        parser.write(buffer)
        return buffer.getvalue()

    def as_dict(self):
        return {section: dict(entries) for section, entries in self.values.items()}

    def __repr__(self):
        g = self.values["geometry"]
        return f"ExperimentConfig({g['W']}x{g['H']} {g['bc']}, {self.params()!r})"


class ConfigAnalyzer:
    """
    محلل الإعدادات - Reads an INI source into an ExperimentConfig, then runs one
    visit_<section> cross-check per section, collecting every error.
    """

    def __init__(self):
        self.errors = []

    def add_error(self, section, key, message):
        self.errors.append(ConfigError(message, (section, key)))

    def parse(self, text, source="<config>"):
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        try:
            parser.read_string(text, source=source)
        except configparser.Error as e:
            raise ConfigError(f"cannot parse {source}: {e}", ("file", None))
        config = ExperimentConfig()
        for section in parser.sections():
            if section not in SECTIONS:
                raise ConfigError("unknown section", (section, None))
            for name, raw in parser[section].items():
                option = OPTIONS.lookup(section, name)
                if option is None:
                    raise ConfigError("unknown key", (section, name))
                config.set(section, name, OptionChecker.coerce(option, raw))
        return config

    def visit(self, config):
        self.errors = []
        for section in SECTIONS:
            getattr(self, f"visit_{section}")(config)
        return self.errors

    def visit_model(self, config):
        m = config["model"]
        if m["beta"] <= 0:
            self.add_error("model", "beta", "must be positive")
        if m["a"] <= 0:
            self.add_error("model", "a", "must be positive")
        if any(b <= 0 for b in m["beta_ladder"]):
            self.add_error("model", "beta_ladder", "every entry must be positive")
        if m["beta_ladder"] and m["anneal_sweeps"] <= 0:
            self.add_error("model", "anneal_sweeps", "must be positive when beta_ladder is set")

    def visit_geometry(self, config):
        g = config["geometry"]
        if g["W"] < 1 or g["H"] < 1:
            self.add_error("geometry", "W", "window dimensions must be positive")
        try:
            bc = config.boundary()
        except ModelError as e:
            self.add_error("geometry", "bc", e.message)
            return
        if bc.is_periodic and (g["W"] < 2 or g["H"] < 2):
            self.add_error("geometry", "W", "tori need width and height of at least 2")

    def visit_sampler(self, config):
        s = config["sampler"]
        if s["sweeps"] <= 0:
            self.add_error("sampler", "sweeps", "must be positive")
        if s["burn_in"] < 0:
            self.add_error("sampler", "burn_in", "must be non-negative")
        if s["measure_every"] <= 0:
            self.add_error("sampler", "measure_every", "must be positive")
        if s["init"] not in INIT_CHOICES:
            self.add_error("sampler", "init", f"must be one of {', '.join(INIT_CHOICES)}")
        if s["init"] == "file" and not s["init_file"]:
            self.add_error("sampler", "init_file", "required when init = file")
        unknown = [m for m in s["moves"] if m not in ("flip", "pivot", "slide")]
        if unknown:
            self.add_error("sampler", "moves", f"unknown move types {unknown}")
        p_pivot, p_slide = config.move_probabilities()
        if p_pivot < 0 or p_slide < 0 or p_pivot + p_slide > 1:
            self.add_error("sampler", "p_pivot", "move probabilities must be non-negative and sum to at most 1")
        if s["chains"] < 1 or s["pairs"] < 1:
            self.add_error("sampler", "chains", "chains and pairs must be positive")
        if s["check_every"] < 0 or s["snapshots"] < 0:
            self.add_error("sampler", "check_every", "check_every and snapshots must be non-negative")

    def visit_analysis(self, config):
        a = config["analysis"]
        if a["N"] <= 2:
            self.add_error("analysis", "N", "must exceed 2")
        scales = [(b, b) for b in a["b_values"]] or [(a["K"], a["L"])]
        g = config["geometry"]
        for K, L in scales:
            if K < 1 or L < 1:
                self.add_error("analysis", "K", "grid scales must be positive")
            elif g["W"] % K or g["H"] % L or K * a["N"] > g["W"] or L * a["N"] > g["H"]:
                self.add_error("analysis", "b_values" if a["b_values"] else "K",
                               f"scale {K}x{L} with N={a['N']} does not fit the {g['W']}x{g['H']} torus")
        if a["escape_distance"] < 1:
            self.add_error("analysis", "escape_distance", "must be at least 1")
        if a["workers"] < 1:
            self.add_error("analysis", "workers", "must be positive")

    def visit_sealing(self, config):
        s = config["sealing"]
        if s["N"] <= 2:
            self.add_error("sealing", "N", "must exceed 2")
        if s["a_scale"] < 1:
            self.add_error("sealing", "a_scale", "must be positive")
        if s["c_scale"] < 0:
            self.add_error("sealing", "c_scale", "must be non-negative")
        if s["c_const"] <= 0:
            self.add_error("sealing", "c_const", "must be positive")

    def visit_output(self, config):
        bad = [f for f in config["output"]["formats"] if f not in FORMAT_CHOICES]
        if bad:
            self.add_error("output", "formats", f"unknown formats {bad}")


# دوال مساعدة للاستدعاء المباشر
def parse_config(text, source="<config>"):
    """Parse and validate; raise the first collected error"""
    analyzer = ConfigAnalyzer()
    config = analyzer.parse(text, source)
    errors = analyzer.visit(config)
    for err in errors[1:]:
        logger.error("%s", err.format_error())
    if errors:
        raise errors[0]
    return config


def load_config(path=None):
    if path is None:
        return parse_config("")
    with open(path, "r", encoding="utf-8") as handle:
        return parse_config(handle.read(), source=path)


def apply_overrides(config, overrides):
    """Apply 'section.key=value' strings on top of a resolved config"""
    for item in overrides or []:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override must read section.key=value, got '{item}'", ("override", None))
        path, raw = item.split("=", 1)
        section, name = path.strip().split(".", 1)
        option = OPTIONS.lookup(section, name)
        if option is None:
            raise ConfigError("unknown key", (section, name))
        config.set(section, name, OptionChecker.coerce(option, raw))
    errors = ConfigAnalyzer().visit(config)
    if errors:
        raise errors[0]
    return config
