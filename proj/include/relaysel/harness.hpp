#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "agents.hpp"
#include "algorithm.hpp"
#include "baselines.hpp"
#include "channel.hpp"
#include "env.hpp"
#include "nn.hpp"
#include "rng.hpp"

namespace relaysel::harness {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Relay coordinates of the non-identical (i.n.i.d.) scenario; source at
// (0,0), destination at (10,0).
inline const std::vector<Point>& inid_relays() {
    static const std::vector<Point> pos = {{4.0, -2.6}, {2.9, 2.1}, {6.3, 2.5}, {3.6, -1.2}, {4.5, 2.1},
                                           {7.8, 0.2},  {4.1, 3.5}, {6.7, -2.9}, {5.2, 1.8}, {7.6, 2.1}};
    return pos;
}

// Everything one experiment needs. Mirrors the CLI flags and config-file keys.
struct ExperimentConfig {
    std::string preset = "iid_default";
    std::size_t relays = 10;
    std::size_t buffer = 10;
    double eta = 8.0;
    std::int64_t delay = 6;
    double snr_db = 50.0;
    double alpha = 3.0;
    double distance = 5.0; ///< relay distance for iid_default
    Fading fading = Fading::rayleigh;
    TrainConfig train;

    EnvConfig env() const {
        const double ptn = db_to_linear(snr_db);
        std::optional<Topology> topo;
        if (preset == "iid_default") {
            topo = Topology::equidistant(relays, distance, alpha, ptn);
        } else if (preset == "inid_default") {
            const auto& all = inid_relays();
            if (relays < 1 || relays > all.size())
                throw ConfigError("inid_default has positions for 1.." + std::to_string(all.size()) + " relays");
            topo = Topology({0.0, 0.0}, {10.0, 0.0}, {all.begin(), all.begin() + static_cast<std::ptrdiff_t>(relays)},
                            alpha, ptn);
        } else {
            throw ConfigError("unknown preset '" + preset + "' (expected iid_default or inid_default)");
        }
        EnvConfig cfg{*topo, buffer, eta, delay};
        cfg.fading = fading;
        return cfg;
    }

    void validate() const {
        try {
            if (relays < 1)
                throw ConfigError("relays must be >= 1");
            env().validate();
            train.validate();
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            throw ConfigError(e.what());
        }
    }
};

inline ExperimentConfig preset(std::string_view name) {
    ExperimentConfig c;
    c.preset = std::string(name);
    if (name != "iid_default" && name != "inid_default")
        throw ConfigError("unknown preset '" + c.preset + "' (expected iid_default or inid_default)");
    return c;
}

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
    T out{};
    const char* first = value.data();
    const char* last = value.data() + value.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    if (ec != std::errc() || ptr != last)
        throw ConfigError("bad value '" + value + "' for " + key);
    return out;
}

inline bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "1" || value == "true" || value == "yes" || value == "on")
        return true;
    if (value == "0" || value == "false" || value == "no" || value == "off")
        return false;
    throw ConfigError("bad boolean '" + value + "' for " + key);
}

inline std::vector<std::size_t> parse_sizes(const std::string& key, const std::string& value) {
    std::vector<std::size_t> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ','))
        out.push_back(parse_number<std::size_t>(key, trim(item)));
    if (out.empty())
        throw ConfigError("empty list for " + key);
    return out;
}

inline std::string join_sizes(const std::vector<std::size_t>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i)
        s += (i ? "," : "") + std::to_string(v[i]);
    return s;
}

inline std::string format_double(double x) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, ptr);
}

} // namespace detail

// Applies one key. Keys are the long CLI flag names without dashes.
inline void apply_setting(ExperimentConfig& c, const std::string& key, const std::string& value) {
    using detail::parse_number;
    if (key == "preset") {
        c.preset = preset(value).preset;
    } else if (key == "relays") {
        c.relays = parse_number<std::size_t>(key, value);
    } else if (key == "buffer") {
        c.buffer = parse_number<std::size_t>(key, value);
    } else if (key == "eta") {
        c.eta = parse_number<double>(key, value);
    } else if (key == "delay") {
        c.delay = parse_number<std::int64_t>(key, value);
    } else if (key == "snr-db") {
        c.snr_db = parse_number<double>(key, value);
    } else if (key == "alpha") {
        c.alpha = parse_number<double>(key, value);
    } else if (key == "distance") {
        c.distance = parse_number<double>(key, value);
    } else if (key == "fading") {
        if (value == "rayleigh")
            c.fading = Fading::rayleigh;
        else if (value == "constant")
            c.fading = Fading::constant;
        else
            throw ConfigError("unknown fading '" + value + "' (expected rayleigh or constant)");
    } else if (key == "algorithm") {
        try {
            c.train.algorithm = parse_algorithm(value);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
    } else if (key == "assist") {
        try {
            c.train.assist = parse_assist(value);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
    } else if (key == "seed") {
        c.train.seed = parse_number<std::uint64_t>(key, value);
    } else if (key == "rounds") {
        c.train.total_rounds = parse_number<std::size_t>(key, value);
    } else if (key == "discount") {
        c.train.delta = parse_number<double>(key, value);
    } else if (key == "eps-decay") {
        c.train.f = parse_number<double>(key, value);
    } else if (key == "eps-min") {
        c.train.eps_min = parse_number<double>(key, value);
    } else if (key == "lr") {
        c.train.lr = parse_number<double>(key, value);
    } else if (key == "ng") {
        c.train.n_g = parse_number<std::size_t>(key, value);
    } else if (key == "np") {
        c.train.n_p = parse_number<std::size_t>(key, value);
    } else if (key == "ne") {
        c.train.n_e = parse_number<std::size_t>(key, value);
    } else if (key == "hidden") {
        c.train.hidden = detail::parse_sizes(key, value);
    } else if (key == "eval-slots") {
        c.train.eval_slots = parse_number<std::int64_t>(key, value);
    } else if (key == "timing") {
        c.train.record_time = detail::parse_bool(key, value);
    } else {
        throw ConfigError("unknown setting '" + key + "'");
    }
}

// Flat "key = value" lines; '#' starts a comment. Unknown keys are errors.
// Keys that are not experiment settings (for instance out) are returned.
inline std::map<std::string, std::string> parse_config_text(std::istream& in) {
    std::map<std::string, std::string> kv;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos)
            line.resize(hash);
        const std::string t = detail::trim(line);
        if (t.empty())
            continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        std::string key = detail::trim(std::string_view(t).substr(0, eq));
        if (key.starts_with("--"))
            key.erase(0, 2);
        kv[key] = detail::trim(std::string_view(t).substr(eq + 1));
    }
    return kv;
}

inline std::map<std::string, std::string> load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config file " + path);
    return parse_config_text(in);
}

// Effective settings as key/value pairs, in a fixed order.
inline std::vector<std::pair<std::string, std::string>> describe(const ExperimentConfig& c) {
    using detail::format_double;
    const auto& t = c.train;
    return {{"preset", c.preset},
            {"relays", std::to_string(c.relays)},
            {"buffer", std::to_string(c.buffer)},
            {"eta", format_double(c.eta)},
            {"delay", std::to_string(c.delay)},
            {"snr-db", format_double(c.snr_db)},
            {"alpha", format_double(c.alpha)},
            {"distance", format_double(c.distance)},
            {"fading", c.fading == Fading::constant ? "constant" : "rayleigh"},
            {"algorithm", to_string(t.algorithm)},
            {"assist", to_string(t.assist)},
            {"variant", variant_name(t.algorithm, t.assist)},
            {"seed", std::to_string(t.seed)},
            {"rounds", std::to_string(t.total_rounds)},
            {"discount", format_double(t.delta)},
            {"eps-decay", format_double(t.f)},
            {"eps-min", format_double(t.eps_min)},
            {"lr", format_double(t.lr)},
            {"ng", std::to_string(t.n_g)},
            {"np", std::to_string(t.n_p)},
            {"ne", std::to_string(t.n_e)},
            {"hidden", detail::join_sizes(t.hidden)},
            {"eval-slots", std::to_string(t.eval_slots)},
            {"timing", t.record_time ? "true" : "false"}};
}

// Metrics CSV:
//
//   # relaysel metrics v1
//   # <key>=<value>            (one line per effective setting)
//   iteration,throughput,loss,epsilon,mean_abs_invalid_q,seconds
//   <one row per logged round>
//
// Reals are printed in shortest round-trip form.
inline constexpr std::string_view metrics_columns = "iteration,throughput,loss,epsilon,mean_abs_invalid_q,seconds";

inline void write_metrics_header(std::ostream& os, const ExperimentConfig& c) {
    os << "# relaysel metrics v1\n";
    for (const auto& [k, v] : describe(c))
        os << "# " << k << '=' << v << '\n';
    os << metrics_columns << '\n';
}

inline std::string format_metrics_row(const Metrics& m) {
    using detail::format_double;
    return std::to_string(m.iteration) + ',' + format_double(m.throughput) + ',' + format_double(m.loss) + ',' +
           format_double(m.epsilon) + ',' + format_double(m.mean_abs_invalid_q) + ',' + format_double(m.seconds);
}

inline Metrics parse_metrics_row(const std::string& line) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ','))
        f.push_back(item);
    if (f.size() != 6)
        throw std::runtime_error("metrics row has " + std::to_string(f.size()) + " fields, expected 6");
    using detail::parse_number;
    Metrics m;
    m.iteration = parse_number<std::size_t>("iteration", f[0]);
    m.throughput = parse_number<double>("throughput", f[1]);
    m.loss = parse_number<double>("loss", f[2]);
    m.epsilon = parse_number<double>("epsilon", f[3]);
    m.mean_abs_invalid_q = parse_number<double>("mean_abs_invalid_q", f[4]);
    m.seconds = parse_number<double>("seconds", f[5]);
    return m;
}

struct MetricsFile {
    std::map<std::string, std::string> settings;
    std::vector<Metrics> rows;
};

inline MetricsFile read_metrics(std::istream& in) {
    MetricsFile mf;
    std::string line;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (line.starts_with('#')) {
            const auto eq = line.find('=');
            if (eq != std::string::npos)
                mf.settings[detail::trim(std::string_view(line).substr(1, eq - 1))] = line.substr(eq + 1);
            continue;
        }
        if (line.empty())
            continue;
        if (!header_seen) {
            if (line != metrics_columns)
                throw std::runtime_error("unexpected metrics header: " + line);
            header_seen = true;
            continue;
        }
        mf.rows.push_back(parse_metrics_row(line));
    }
    if (!header_seen)
        throw std::runtime_error("metrics file has no column header");
    return mf;
}

struct TrainRunResult {
    nn::Network network;
    std::vector<Metrics> metrics;
};

// Trains, streaming one CSV row per round to `csv`.
inline TrainRunResult run_train(const ExperimentConfig& c, std::ostream& csv) {
    c.validate();
    write_metrics_header(csv, c);
    csv.flush();
    auto r = train(c.env(), c.train, [&csv](const Metrics& m) {
        csv << format_metrics_row(m) << '\n';
        csv.flush();
    });
    if (!csv)
        throw std::runtime_error("failed writing metrics");
    return {std::move(r.network), std::move(r.metrics)};
}

inline TrainRunResult run_train(const ExperimentConfig& c, const std::string& csv_path,
                                const std::string& checkpoint_path) {
    c.validate();
    std::ofstream csv(csv_path);
    if (!csv)
        throw std::runtime_error("cannot write " + csv_path);
    auto r = run_train(c, csv);
    std::ofstream ck(checkpoint_path);
    if (!ck)
        throw std::runtime_error("cannot write " + checkpoint_path);
    nn::save_checkpoint(r.network, ck);
    if (!ck)
        throw std::runtime_error("failed writing " + checkpoint_path);
    return r;
}

// Evaluation seeds are disjoint from training seeds.
inline std::uint64_t eval_seed(std::uint64_t seed) { return seed ^ 0x9e3779b97f4a7c15ULL; }

inline double eval_named_policy(const std::string& name, const EnvConfig& base, std::int64_t slots,
                                std::uint64_t seed) {
    if (slots < 1)
        throw ConfigError("evaluation needs at least one slot");
    EnvConfig cfg = base;
    cfg.mode = InvalidActionMode::masked;
    Rng env_rng(eval_seed(seed));
    if (name == "max-link")
        return evaluate_policy(max_link_policy(cfg), cfg, slots, env_rng);
    if (name == "random") {
        Rng pick(eval_seed(seed) + 1);
        return evaluate_policy(random_valid_policy(cfg, pick), cfg, slots, env_rng);
    }
    if (name == "none")
        return evaluate_policy([](const EnvState&) { return Action::none(); }, cfg, slots, env_rng);
    throw ConfigError("unknown policy '" + name + "' (expected max-link, random or none)");
}

// Greedy learned policy; assist picks masked or unmasked selection.
inline double eval_network(const nn::Network& net, const EnvConfig& base, Assist assist, std::int64_t slots,
                           std::uint64_t seed) {
    if (slots < 1)
        throw ConfigError("evaluation needs at least one slot");
    const EnvConfig cfg = training_env(base, assist);
    if (net.input_dim() != cfg.state_dim() || net.output_dim() != cfg.num_actions())
        throw ConfigError("checkpoint does not match " + std::to_string(cfg.relays()) + " relays");
    Rng env_rng(eval_seed(seed));
    return evaluate_policy(greedy_policy(net, cfg), cfg, slots, env_rng);
}

inline nn::Network load_checkpoint_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open checkpoint " + path);
    return nn::load_checkpoint(in);
}

enum class SweepAxis { delay, rate, relays };

inline SweepAxis parse_axis(std::string_view s) {
    if (s == "delay")
        return SweepAxis::delay;
    if (s == "rate")
        return SweepAxis::rate;
    if (s == "relays")
        return SweepAxis::relays;
    throw ConfigError("unknown sweep axis '" + std::string(s) + "' (expected delay, rate or relays)");
}

inline std::string to_string(SweepAxis a) {
    switch (a) {
    case SweepAxis::delay:
        return "delay";
    case SweepAxis::rate:
        return "rate";
    case SweepAxis::relays:
        return "relays";
    }
    return "";
}

inline ExperimentConfig with_axis_value(ExperimentConfig c, SweepAxis axis, double value) {
    switch (axis) {
    case SweepAxis::delay:
        c.delay = static_cast<std::int64_t>(value);
        if (static_cast<double>(c.delay) != value)
            throw ConfigError("delay sweep values must be integers");
        break;
    case SweepAxis::rate:
        c.eta = value;
        break;
    case SweepAxis::relays:
        c.relays = static_cast<std::size_t>(value);
        if (static_cast<double>(c.relays) != value)
            throw ConfigError("relay sweep values must be integers");
        break;
    }
    return c;
}

// A sweep policy is a learner variant (trained then evaluated greedily) or a
// fixed baseline name.
struct SweepPolicy {
    std::string name;
    std::optional<std::pair<Algorithm, Assist>> learner;
};

inline SweepPolicy parse_sweep_policy(std::string_view s) {
    if (s == "dad-sarsa")
        return {"DAD-Sarsa", std::pair{Algorithm::sarsa, Assist::decision}};
    if (s == "dad-ql")
        return {"DAD-QL", std::pair{Algorithm::q_learning, Assist::decision}};
    if (s == "punish-sarsa")
        return {"punish-Sarsa", std::pair{Algorithm::sarsa, Assist::punishment}};
    if (s == "punish-ql")
        return {"punish-QL", std::pair{Algorithm::q_learning, Assist::punishment}};
    if (s == "max-link" || s == "random")
        return {std::string(s), std::nullopt};
    throw ConfigError("unknown sweep policy '" + std::string(s) +
                      "' (expected dad-sarsa, dad-ql, punish-sarsa, punish-ql, max-link or random)");
}

struct SweepSpec {
    SweepAxis axis = SweepAxis::delay;
    std::vector<double> values;
    std::vector<SweepPolicy> policies;
    std::vector<std::uint64_t> seeds = {1, 2, 3};
    std::int64_t eval_slots = 100000;
    std::size_t workers = 0; ///< 0: hardware concurrency
};

struct SweepRow {
    double value = 0.0;
    std::string policy;
    std::vector<double> per_seed;
    double median = 0.0;
};

inline double median(std::vector<double> v) {
    if (v.empty())
        throw std::invalid_argument("median of empty list");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Runs every (value, policy, seed) job, in parallel when workers allow. Each
// job owns its environment, networks and random streams, so results do not
// depend on scheduling; rows come back in (value, policy) order.
inline std::vector<SweepRow> run_sweep(const ExperimentConfig& base, const SweepSpec& spec) {
    if (spec.values.empty())
        throw ConfigError("sweep needs at least one value");
    if (spec.policies.empty())
        throw ConfigError("sweep needs at least one policy");
    if (spec.seeds.empty())
        throw ConfigError("sweep needs at least one seed");

    struct Job {
        std::size_t value_idx;
        std::size_t policy_idx;
        std::size_t seed_idx;
    };
    std::vector<Job> jobs;
    for (std::size_t v = 0; v < spec.values.size(); ++v) {
        with_axis_value(base, spec.axis, spec.values[v]).validate();
        for (std::size_t p = 0; p < spec.policies.size(); ++p)
            for (std::size_t s = 0; s < spec.seeds.size(); ++s)
                jobs.push_back({v, p, s});
    }

    std::vector<double> results(jobs.size(), 0.0);
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t j = next++; j < jobs.size(); j = next++) {
            try {
                const auto& job = jobs[j];
                ExperimentConfig c = with_axis_value(base, spec.axis, spec.values[job.value_idx]);
                const auto& pol = spec.policies[job.policy_idx];
                const std::uint64_t seed = spec.seeds[job.seed_idx];
                if (pol.learner) {
                    c.train.algorithm = pol.learner->first;
                    c.train.assist = pol.learner->second;
                    c.train.seed = seed;
                    const auto r = train(c.env(), c.train);
                    results[j] = eval_network(r.network, c.env(), c.train.assist, spec.eval_slots, seed);
                } else {
                    results[j] = eval_named_policy(pol.name, c.env(), spec.eval_slots, seed);
                }
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure)
                    failure = std::current_exception();
            }
        }
    };
    std::size_t n_workers = spec.workers ? spec.workers : std::max(1u, std::thread::hardware_concurrency());
    n_workers = std::min(n_workers, jobs.size());
    std::vector<std::thread> pool;
    for (std::size_t i = 1; i < n_workers; ++i)
        pool.emplace_back(worker);
    worker();
    for (auto& t : pool)
        t.join();
    if (failure)
        std::rethrow_exception(failure);

    std::vector<SweepRow> rows;
    for (std::size_t v = 0; v < spec.values.size(); ++v)
        for (std::size_t p = 0; p < spec.policies.size(); ++p) {
            SweepRow row;
            row.value = spec.values[v];
            row.policy = spec.policies[p].name;
            for (std::size_t j = 0; j < jobs.size(); ++j)
                if (jobs[j].value_idx == v && jobs[j].policy_idx == p)
                    row.per_seed.push_back(results[j]);
            row.median = median(row.per_seed);
            rows.push_back(std::move(row));
        }
    return rows;
}

// Sweep CSV: "# key=value" comment lines, then
//   axis,value,policy,median_throughput,seed_throughputs
// where seed_throughputs is a ';'-separated list in seed order.
inline constexpr std::string_view sweep_columns = "axis,value,policy,median_throughput,seed_throughputs";

inline void write_sweep_csv(std::ostream& os, const ExperimentConfig& base, const SweepSpec& spec,
                            const std::vector<SweepRow>& rows) {
    using detail::format_double;
    os << "# relaysel sweep v1\n";
    for (const auto& [k, v] : describe(base))
        os << "# " << k << '=' << v << '\n';
    std::string seeds;
    for (std::size_t i = 0; i < spec.seeds.size(); ++i)
        seeds += (i ? "," : "") + std::to_string(spec.seeds[i]);
    os << "# sweep-seeds=" << seeds << '\n' << "# eval-slots-sweep=" << spec.eval_slots << '\n';
    os << sweep_columns << '\n';
    for (const auto& r : rows) {
        os << to_string(spec.axis) << ',' << format_double(r.value) << ',' << r.policy << ','
           << format_double(r.median) << ',';
        for (std::size_t i = 0; i < r.per_seed.size(); ++i)
            os << (i ? ";" : "") << format_double(r.per_seed[i]);
        os << '\n';
    }
}

} // namespace relaysel::harness
