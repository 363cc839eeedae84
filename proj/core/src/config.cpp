#include "fattnn/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "fattnn/error.hpp"

namespace fattnn {

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view want) {
    throw ConfigError("invalid value '" + std::string(value) + "' for key '" + std::string(key) +
                      "' (expected " + std::string(want) + ")");
}

double parse_double(std::string_view key, std::string_view v) {
    v = trim(v);
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size() || v.empty()) bad_value(key, v, "a number");
    return out;
}

std::uint64_t parse_uint(std::string_view key, std::string_view v) {
    v = trim(v);
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size() || v.empty()) {
        bad_value(key, v, "a non-negative integer");
    }
    return out;
}

std::size_t parse_size(std::string_view key, std::string_view v) {
    return static_cast<std::size_t>(parse_uint(key, v));
}

bool parse_bool(std::string_view key, std::string_view v) {
    v = trim(v);
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    bad_value(key, v, "true or false");
}

std::vector<std::string_view> split_list(std::string_view v) {
    std::vector<std::string_view> items;
    std::size_t pos = 0;
    while (true) {
        const auto comma = v.find(',', pos);
        items.push_back(trim(v.substr(pos, comma == std::string_view::npos ? v.npos : comma - pos)));
        if (comma == std::string_view::npos) break;
        pos = comma + 1;
    }
    return items;
}

std::vector<std::size_t> parse_sizes(std::string_view key, std::string_view v) {
    std::vector<std::size_t> out;
    for (auto item : split_list(v)) out.push_back(parse_size(key, item));
    return out;
}

std::vector<double> parse_doubles(std::string_view key, std::string_view v) {
    std::vector<double> out;
    for (auto item : split_list(v)) out.push_back(parse_double(key, item));
    return out;
}

std::string fmt(double x) {
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, ptr);
}

template <class T>
std::string fmt_list(const std::vector<T>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += ',';
        if constexpr (std::is_floating_point_v<T>) {
            out += fmt(values[i]);
        } else {
            out += std::to_string(values[i]);
        }
    }
    return out;
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

}  // namespace

void ExperimentConfig::validate() const {
    sim.validate();
    // Widths come from the data at run time.
    TcnConfig tcn = run.tcn;
    tcn.input_width = tcn.output_width = 1;
    if (tcn.use_lagged_response) tcn.input_width = 2;
    tcn.validate();
    if (!(run.split_ratio > 0.0 && run.split_ratio < 1.0)) {
        throw ConfigError("split must lie in (0, 1)");
    }
    if (!(run.fit.eps > 0.0)) throw ConfigError("eps must be positive");
    if (run.bootstrap_replications == 0) throw ConfigError("bootstrap_b must be at least 1");
    if (!(run.ci_level > 0.0 && run.ci_level < 1.0)) throw ConfigError("ci_level must lie in (0, 1)");
    if (replications == 0) throw ConfigError("replications must be at least 1");
    if (rate_lambda_scales.empty() || rate_n.empty() || rate_seeds == 0) {
        throw ConfigError("rate diagnostic grids must be non-empty");
    }
}

void apply_setting(ExperimentConfig& c, std::string_view key, std::string_view value) {
    value = trim(value);
    auto& s = c.sim;
    auto& r = c.run;
    auto& t = c.run.tcn;
    if (key == "preset") {
        const auto which = parse_uint(key, value);
        if (which < 1 || which > 3) bad_value(key, value, "1, 2 or 3");
        s = simulation_config(static_cast<int>(which), s.seed);
    } else if (key == "dims") {
        s.dims = parse_sizes(key, value);
    } else if (key == "ranks") {
        s.ranks = parse_sizes(key, value);
    } else if (key == "response_dims") {
        s.response_dims = parse_sizes(key, value);
    } else if (key == "n") {
        s.n = parse_size(key, value);
    } else if (key == "transform") {
        try {
            s.transform = parse_transform(std::string(value));
        } catch (const ConfigError&) {
            bad_value(key, value, "cos, log_abs, softplus or identity");
        }
    } else if (key == "sigma_u2") {
        s.sigma_u2 = parse_double(key, value);
    } else if (key == "cp_rank") {
        s.cp_rank = parse_size(key, value);
    } else if (key == "burn_in") {
        s.burn_in = parse_size(key, value);
    } else if (key == "seed") {
        s.seed = r.seed = t.seed = parse_uint(key, value);
    } else if (key == "rho") {
        s.rho = parse_double(key, value);
    } else if (key == "lambda") {
        if (value == "auto") {
            s.lambda.reset();
        } else {
            s.lambda = parse_double(key, value);
        }
    } else if (key == "lambda_scale") {
        s.lambda_scale = parse_double(key, value);
    } else if (key == "factor_noise_sd") {
        s.factor_noise_sd = parse_double(key, value);
    } else if (key == "covariate_noise_sd") {
        s.covariate_noise_sd = parse_double(key, value);
    } else if (key == "split") {
        r.split_ratio = parse_double(key, value);
    } else if (key == "fit_ranks") {
        if (value == "auto") {
            r.ranks.reset();
        } else {
            r.ranks = parse_sizes(key, value);
        }
    } else if (key == "r_max") {
        if (value == "auto") {
            r.r_max.clear();
        } else {
            r.r_max = parse_sizes(key, value);
        }
    } else if (key == "eps") {
        r.fit.eps = parse_double(key, value);
    } else if (key == "max_iter") {
        r.fit.max_iter = parse_size(key, value);
    } else if (key == "center") {
        r.fit.center = parse_bool(key, value);
    } else if (key == "tcn.channels") {
        t.channels = parse_sizes(key, value);
    } else if (key == "tcn.kernel_size") {
        t.kernel_size = parse_size(key, value);
    } else if (key == "tcn.dilations") {
        t.dilations = parse_sizes(key, value);
    } else if (key == "tcn.activation") {
        if (value == "relu") {
            t.activation = Activation::relu;
        } else if (value == "linear") {
            t.activation = Activation::linear;
        } else {
            bad_value(key, value, "relu or linear");
        }
    } else if (key == "tcn.dropout") {
        t.dropout = parse_double(key, value);
    } else if (key == "tcn.lr") {
        t.learning_rate = parse_double(key, value);
    } else if (key == "tcn.epochs") {
        t.epochs = parse_size(key, value);
    } else if (key == "tcn.batch_length") {
        t.batch_length = parse_size(key, value);
    } else if (key == "tcn.patience") {
        t.patience = parse_size(key, value);
    } else if (key == "tcn.validation_fraction") {
        t.validation_fraction = parse_double(key, value);
    } else if (key == "tcn.lagged_response") {
        t.use_lagged_response = parse_bool(key, value);
    } else if (key == "tcn.standardize") {
        t.standardize = parse_bool(key, value);
    } else if (key == "bootstrap_b") {
        r.bootstrap_replications = parse_size(key, value);
    } else if (key == "ci_level") {
        r.ci_level = parse_double(key, value);
    } else if (key == "replications") {
        c.replications = parse_size(key, value);
    } else if (key == "rate.lambda_scales") {
        c.rate_lambda_scales = parse_doubles(key, value);
    } else if (key == "rate.n") {
        c.rate_n = parse_sizes(key, value);
    } else if (key == "rate.seeds") {
        c.rate_seeds = parse_size(key, value);
    } else {
        throw ConfigError("unknown config key '" + std::string(key) + "'");
    }
}

ExperimentConfig parse_config(std::string_view text) {
    struct Entry {
        std::size_t line;
        std::string_view key, value;
    };
    std::vector<Entry> entries;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
        }
        entries.push_back({line_no, trim(line.substr(0, eq)), trim(line.substr(eq + 1))});
    }

    ExperimentConfig config;
    auto apply = [&](const Entry& e) {
        try {
            apply_setting(config, e.key, e.value);
        } catch (const ConfigError& err) {
            throw ConfigError("config line " + std::to_string(e.line) + ": " + err.what());
        }
    };
    // The seed feeds the preset, and the preset must not clobber later keys.
    for (const auto& e : entries)
        if (e.key == "seed") apply(e);
    for (const auto& e : entries)
        if (e.key == "preset") apply(e);
    for (const auto& e : entries)
        if (e.key != "preset") apply(e);
    config.validate();
    return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

std::vector<std::pair<std::string, std::string>> echo_config(const ExperimentConfig& c) {
    const auto& s = c.sim;
    const auto& r = c.run;
    const auto& t = c.run.tcn;
    return {
        {"dims", fmt_list(s.dims)},
        {"ranks", fmt_list(s.ranks)},
        {"response_dims", fmt_list(s.response_dims)},
        {"n", std::to_string(s.n)},
        {"transform", to_string(s.transform)},
        {"sigma_u2", fmt(s.sigma_u2)},
        {"cp_rank", std::to_string(s.cp_rank)},
        {"burn_in", std::to_string(s.burn_in)},
        {"seed", std::to_string(s.seed)},
        {"rho", fmt(s.rho)},
        {"lambda", s.lambda ? fmt(*s.lambda) : "auto"},
        {"lambda_scale", fmt(s.lambda_scale)},
        {"factor_noise_sd", fmt(s.factor_noise_sd)},
        {"covariate_noise_sd", fmt(s.covariate_noise_sd)},
        {"split", fmt(r.split_ratio)},
        {"fit_ranks", r.ranks ? fmt_list(*r.ranks) : "auto"},
        {"r_max", r.r_max.empty() ? "auto" : fmt_list(r.r_max)},
        {"eps", fmt(r.fit.eps)},
        {"max_iter", std::to_string(r.fit.max_iter)},
        {"center", fmt_bool(r.fit.center)},
        {"tcn.channels", fmt_list(t.channels)},
        {"tcn.kernel_size", std::to_string(t.kernel_size)},
        {"tcn.dilations", fmt_list(t.dilations)},
        {"tcn.activation", t.activation == Activation::relu ? "relu" : "linear"},
        {"tcn.dropout", fmt(t.dropout)},
        {"tcn.lr", fmt(t.learning_rate)},
        {"tcn.epochs", std::to_string(t.epochs)},
        {"tcn.batch_length", std::to_string(t.batch_length)},
        {"tcn.patience", std::to_string(t.patience)},
        {"tcn.validation_fraction", fmt(t.validation_fraction)},
        {"tcn.lagged_response", fmt_bool(t.use_lagged_response)},
        {"tcn.standardize", fmt_bool(t.standardize)},
        {"bootstrap_b", std::to_string(r.bootstrap_replications)},
        {"ci_level", fmt(r.ci_level)},
        {"replications", std::to_string(c.replications)},
        {"rate.lambda_scales", fmt_list(c.rate_lambda_scales)},
        {"rate.n", fmt_list(c.rate_n)},
        {"rate.seeds", std::to_string(c.rate_seeds)},
    };
}

std::string config_text(const ExperimentConfig& config) {
    std::string out;
    for (const auto& [k, v] : echo_config(config)) out += k + " = " + v + "\n";
    return out;
}

}  // namespace fattnn
