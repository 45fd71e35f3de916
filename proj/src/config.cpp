#include "koopkit/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "koopkit/csv.hpp"

namespace koopkit {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

double parse_double(std::string_view s) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
        throw ConfigError("expected a finite number, got '" + std::string(s) + "'");
    }
    return v;
}

std::uint64_t parse_uint(std::string_view s) {
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw ConfigError("expected a nonnegative integer, got '" + std::string(s) + "'");
    }
    return v;
}

std::size_t parse_count(std::string_view s, std::size_t min) {
    const auto v = static_cast<std::size_t>(parse_uint(s));
    if (v < min) throw ConfigError("must be at least " + std::to_string(min));
    return v;
}

double parse_positive(std::string_view s) {
    const double v = parse_double(s);
    if (!(v > 0.0)) throw ConfigError("must be positive, got '" + std::string(s) + "'");
    return v;
}

bool parse_bool(std::string_view s) {
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw ConfigError("expected true or false, got '" + std::string(s) + "'");
}

std::vector<double> parse_list(std::string_view s) {
    std::vector<double> out;
    for (auto item : split(s, ',')) out.push_back(parse_double(item));
    return out;
}

// Comma-separated lead steps; "a:b:step" expands to a, a+step, ..., <= b.
std::vector<std::size_t> parse_leads(std::string_view s) {
    std::vector<std::size_t> out;
    for (auto item : split(s, ',')) {
        if (item.find(':') == std::string_view::npos) {
            out.push_back(static_cast<std::size_t>(parse_uint(item)));
            continue;
        }
        const auto parts = split(item, ':');
        if (parts.size() != 3) throw ConfigError("lead range must read start:stop:step");
        const auto a = parse_uint(parts[0]);
        const auto b = parse_uint(parts[1]);
        const auto step = parse_uint(parts[2]);
        if (step == 0 || b < a) throw ConfigError("lead range needs step >= 1 and stop >= start");
        for (auto q = a; q <= b; q += step) out.push_back(static_cast<std::size_t>(q));
    }
    return out;
}

std::string join(const std::vector<double>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i > 0) out += ';';
        out += format_double(values[i]);
    }
    return out;
}

using Handler = std::function<void(ExperimentConfig&, std::string_view)>;

const std::map<std::string, Handler, std::less<>>& handlers() {
    static const std::map<std::string, Handler, std::less<>> table = {
        {"system.model", [](ExperimentConfig&, std::string_view v) { parse_model_id(v); }},
        {"system.parameters", [](ExperimentConfig& c, std::string_view v) { c.system.parameters = parse_list(v); }},
        {"system.dt", [](ExperimentConfig& c, std::string_view v) { c.system.dt = parse_positive(v); }},
        {"system.n_samples", [](ExperimentConfig& c, std::string_view v) { c.system.n_samples = parse_count(v, 2); }},
        {"system.spinup_steps",
         [](ExperimentConfig& c, std::string_view v) { c.system.spinup_steps = parse_count(v, 0); }},
        {"system.initial_state",
         [](ExperimentConfig& c, std::string_view v) { c.system.initial_state = parse_list(v); }},
        {"system.substeps",
         [](ExperimentConfig& c, std::string_view v) { c.system.integrator_substeps = parse_count(v, 1); }},
        {"system.covariate", [](ExperimentConfig& c, std::string_view v) { c.covariate = CovariateMap::parse(v); }},
        {"system.response", [](ExperimentConfig& c, std::string_view v) { c.response = ResponseMap::parse(v); }},
        {"kernel.family", [](ExperimentConfig& c, std::string_view v) { c.kernel.family = parse_kernel_family(v); }},
        {"kernel.epsilon",
         [](ExperimentConfig& c, std::string_view v) {
             if (v == "median") {
                 c.epsilon_from_median = true;
                 return;
             }
             c.kernel.epsilon = parse_positive(v);
             c.epsilon_from_median = false;
         }},
        {"kernel.epsilon_scale", [](ExperimentConfig& c, std::string_view v) { c.epsilon_scale = parse_positive(v); }},
        {"kernel.normalization",
         [](ExperimentConfig& c, std::string_view v) {
             c.kernel.normalization = parse_normalization(v);
             c.normalization_explicit = true;
         }},
        {"kernel.alpha",
         [](ExperimentConfig& c, std::string_view v) {
             const double a = parse_double(v);
             if (a < 0.0) throw ConfigError("must be nonnegative");
             c.kernel.alpha = a;
         }},
        {"basis.size", [](ExperimentConfig& c, std::string_view v) { c.basis_size = parse_count(v, 1); }},
        {"embedding.delays",
         [](ExperimentConfig& c, std::string_view v) {
             c.delay_Q = parse_count(v, 1);
             c.kernel.delay_Q = c.delay_Q;
         }},
        {"forecast.leads", [](ExperimentConfig& c, std::string_view v) { c.leads = parse_leads(v); }},
        {"forecast.test_fraction",
         [](ExperimentConfig& c, std::string_view v) {
             const double f = parse_double(v);
             if (f < 0.0 || f > 0.5) throw ConfigError("must lie in [0, 0.5]");
             c.test_split_fraction = f;
         }},
        {"forecast.analog_neighbors",
         [](ExperimentConfig& c, std::string_view v) { c.analog_neighbors = parse_count(v, 1); }},
        {"patterns.residual_q", [](ExperimentConfig& c, std::string_view v) { c.residual_q = parse_count(v, 1); }},
        {"patterns.count", [](ExperimentConfig& c, std::string_view v) { c.pattern_count = parse_count(v, 1); }},
        {"patterns.coherence_max_lag",
         [](ExperimentConfig& c, std::string_view v) { c.coherence_max_lag = parse_count(v, 1); }},
        {"patterns.random_trials",
         [](ExperimentConfig& c, std::string_view v) { c.random_trials = parse_count(v, 1); }},
        {"autocorr.max_lag", [](ExperimentConfig& c, std::string_view v) { c.autocorr_max_lag = parse_count(v, 0); }},
        {"autocorr.observable",
         [](ExperimentConfig& c, std::string_view v) { c.autocorr_observable = CorrelationObservable::parse(v); }},
        {"autocorr.center", [](ExperimentConfig& c, std::string_view v) { c.autocorr_center = parse_bool(v); }},
        {"pod.rank", [](ExperimentConfig& c, std::string_view v) { c.pod_rank = parse_count(v, 1); }},
        {"run.mode", [](ExperimentConfig& c, std::string_view v) { c.mode = parse_run_mode(v); }},
        {"run.output_dir", [](ExperimentConfig& c, std::string_view v) { c.output_dir = std::string(v); }},
        {"run.seed", [](ExperimentConfig& c, std::string_view v) { c.seed = parse_uint(v); }},
    };
    return table;
}

struct Entry {
    std::string key;
    std::string value;
    std::size_t line = 0;
};

[[noreturn]] void fail(const Entry& e, const std::string& what) {
    throw ConfigError("line " + std::to_string(e.line) + ": " + e.key + ": " + what);
}

}  // namespace

std::string to_string(RunMode mode) {
    switch (mode) {
        case RunMode::eigen: return "eigen";
        case RunMode::df: return "df";
        case RunMode::kaf: return "kaf";
        case RunMode::analog: return "analog";
        case RunMode::patterns: return "patterns";
        case RunMode::autocorr: return "autocorr";
        case RunMode::pod: return "pod";
    }
    return "unknown";
}

RunMode parse_run_mode(std::string_view text) {
    for (RunMode m : {RunMode::eigen, RunMode::df, RunMode::kaf, RunMode::analog, RunMode::patterns,
                      RunMode::autocorr, RunMode::pod}) {
        if (text == to_string(m)) return m;
    }
    throw ConfigError("unknown mode '" + std::string(text) +
                      "' (expected eigen, df, kaf, analog, patterns, autocorr or pod)");
}

bool is_forecast_mode(RunMode mode) {
    return mode == RunMode::df || mode == RunMode::kaf || mode == RunMode::analog;
}

CorrelationObservable CorrelationObservable::parse(std::string_view text) {
    if (text == "response") return {};
    if (text.starts_with("phase(") && text.ends_with(")")) {
        const auto inner = text.substr(6, text.size() - 7);
        return {Kind::phase, static_cast<std::size_t>(parse_uint(trim(inner)))};
    }
    throw ConfigError("unknown observable '" + std::string(text) + "' (expected response or phase(<index>))");
}

std::string CorrelationObservable::to_string() const {
    return kind == Kind::response ? "response" : "phase(" + std::to_string(index) + ")";
}

std::size_t ExperimentConfig::test_count() const {
    if (!is_forecast_mode(mode)) return 0;
    return static_cast<std::size_t>(std::floor(static_cast<double>(system.n_samples) * test_split_fraction));
}

std::size_t ExperimentConfig::train_count() const { return system.n_samples - test_count(); }

void ExperimentConfig::validate() const {
    auto wrap = [](const char* key, auto&& check) {
        try {
            check();
        } catch (const ConfigError& e) {
            throw ConfigError(std::string(key) + ": " + e.what());
        }
    };
    wrap("system", [&] { system.validate(); });
    const bool uses_basis = mode != RunMode::autocorr && mode != RunMode::pod;
    if (uses_basis) wrap("kernel", [&] { kernel.validate(); });
    if (kernel.delay_Q != delay_Q) throw ConfigError("embedding.delays: inconsistent with kernel delay count");

    const std::size_t n_train = train_count();
    if (delay_Q >= n_train) throw ConfigError("embedding.delays: must be below the training sample count");
    const std::size_t n_emb = n_train - (delay_Q - 1);

    if (uses_basis && basis_size > n_emb) {
        throw ConfigError("basis.size: " + std::to_string(basis_size) + " exceeds the training sample count " +
                          std::to_string(n_emb));
    }
    if ((mode == RunMode::kaf || mode == RunMode::patterns) && normalization_explicit &&
        kernel.normalization != Normalization::symmetric) {
        throw ConfigError("kernel.normalization: mode " + to_string(mode) + " requires symmetric normalization");
    }
    if (uses_basis && kernel.normalization == Normalization::none) {
        throw ConfigError("kernel.normalization: an eigenbasis requires symmetric or markov normalization");
    }

    if (!(test_split_fraction >= 0.0 && test_split_fraction <= 0.5)) {
        throw ConfigError("forecast.test_fraction: must lie in [0, 0.5]");
    }
    if (is_forecast_mode(mode)) {
        const std::size_t n_test = test_count();
        if (n_test == 0) throw ConfigError("forecast.test_fraction: leaves an empty test set");
        if (leads.empty()) throw ConfigError("forecast.leads: at least one lead is required");
        for (std::size_t q : leads) {
            if (q >= n_test) {
                throw ConfigError("forecast.leads: lead " + std::to_string(q) + " must be below the test size " +
                                  std::to_string(n_test));
            }
            if (q >= n_emb) throw ConfigError("forecast.leads: lead " + std::to_string(q) + " exceeds training size");
        }
    }
    if (mode == RunMode::patterns) {
        if (residual_q >= n_emb) throw ConfigError("patterns.residual_q: must be below the training sample count");
        if (coherence_max_lag >= n_emb) {
            throw ConfigError("patterns.coherence_max_lag: must be below the training sample count");
        }
    }
    if (mode == RunMode::autocorr && autocorr_max_lag >= system.n_samples) {
        throw ConfigError("autocorr.max_lag: must be below system.n_samples");
    }
}

std::vector<std::pair<std::string, std::string>> ExperimentConfig::describe() const {
    std::vector<std::pair<std::string, std::string>> out;
    auto add = [&](std::string key, std::string value) { out.emplace_back(std::move(key), std::move(value)); };
    std::vector<double> leads_d(leads.begin(), leads.end());
    add("run.mode", to_string(mode));
    add("run.seed", std::to_string(seed));
    add("system.model", to_string(system.model));
    add("system.parameters", join(system.parameters));
    add("system.dt", format_double(system.dt));
    add("system.n_samples", std::to_string(system.n_samples));
    add("system.spinup_steps", std::to_string(system.spinup_steps));
    add("system.initial_state", join(system.initial_state));
    add("system.substeps", std::to_string(system.integrator_substeps));
    add("system.covariate", covariate.to_string());
    add("system.response", response.to_string());
    add("kernel.family", to_string(kernel.family));
    add("kernel.epsilon", epsilon_from_median ? "median" : format_double(kernel.epsilon));
    add("kernel.epsilon_scale", format_double(epsilon_scale));
    add("kernel.normalization", to_string(kernel.normalization));
    add("kernel.alpha", format_double(kernel.alpha));
    add("basis.size", std::to_string(basis_size));
    add("embedding.delays", std::to_string(delay_Q));
    add("forecast.leads", join(leads_d));
    add("forecast.test_fraction", format_double(test_split_fraction));
    add("forecast.analog_neighbors", std::to_string(analog_neighbors));
    add("patterns.residual_q", std::to_string(residual_q));
    add("patterns.count", std::to_string(pattern_count));
    add("patterns.coherence_max_lag", std::to_string(coherence_max_lag));
    add("patterns.random_trials", std::to_string(random_trials));
    add("autocorr.max_lag", std::to_string(autocorr_max_lag));
    add("autocorr.observable", autocorr_observable.to_string());
    add("autocorr.center", autocorr_center ? "true" : "false");
    add("pod.rank", std::to_string(pod_rank));
    return out;
}

ExperimentConfig parse_config_text(std::string_view text) {
    std::vector<Entry> entries;
    std::set<std::string, std::less<>> seen;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto end = text.find('\n', start);
        std::string_view line = text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
        ++line_no;
        start = end == std::string_view::npos ? text.size() + 1 : end + 1;

        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        Entry e;
        e.line = line_no;
        if (eq == std::string_view::npos) {
            throw ConfigError("line " + std::to_string(line_no) + ": expected 'section.key = value'");
        }
        e.key = std::string(trim(line.substr(0, eq)));
        e.value = std::string(trim(line.substr(eq + 1)));
        if (!handlers().contains(e.key)) fail(e, "unknown key");
        if (e.value.empty()) fail(e, "missing value");
        if (!seen.insert(e.key).second) fail(e, "duplicate key");
        entries.push_back(std::move(e));
    }

    ExperimentConfig config;
    for (const Entry& e : entries) {
        if (e.key != "system.model") continue;
        try {
            if (parse_model_id(e.value) == ModelId::torus_rotation) {
                config.system = SystemSpec::torus_default();
                config.covariate = CovariateMap::torus_embedding();
                config.response = ResponseMap::cosine(0);
                // Chord distances on the embedded torus have a fixed scale.
                config.epsilon_from_median = false;
                config.kernel.epsilon = 0.05;
            }
        } catch (const ConfigError& err) {
            fail(e, err.what());
        }
    }
    for (const Entry& e : entries) {
        try {
            handlers().find(e.key)->second(config, e.value);
        } catch (const ConfigError& err) {
            fail(e, err.what());
        }
    }
    return config;
}

ExperimentConfig parse_config(const std::filesystem::path& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw ConfigError("cannot read config file " + path.string());
    std::ostringstream buf;
    buf << file.rdbuf();
    return parse_config_text(buf.str());
}

}  // namespace koopkit
