#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <relaysel/harness.hpp>

using namespace relaysel;
namespace h = relaysel::harness;

namespace {

// Experiment flags shared by every subcommand. The config file is applied
// first and explicit flags override it.
struct ExperimentFlags {
    std::map<std::string, std::string> values;
    std::string config_path;

    void add_to(CLI::App& app) {
        app.add_option("--config", config_path, "flat key = value file; flags override it");
        add(app, "preset", "iid_default or inid_default");
        add(app, "relays", "number of relays K");
        add(app, "buffer", "relay buffer size L (packets)");
        add(app, "eta", "target rate (bits/s/Hz)");
        add(app, "delay", "target delay (slots)");
        add(app, "snr-db", "transmit power to noise ratio (dB)");
        add(app, "alpha", "path-loss exponent");
        add(app, "distance", "relay distance for iid_default (m)");
        add(app, "fading", "rayleigh or constant");
        add(app, "algorithm", "q or sarsa");
        add(app, "assist", "decision or punish");
        add(app, "seed", "random seed");
        add(app, "rounds", "outer rounds (target syncs)");
        add(app, "discount", "discount factor");
        add(app, "eps-decay", "epsilon decay factor");
        add(app, "eps-min", "minimum epsilon");
        add(app, "lr", "Adam step size");
        add(app, "ng", "experiences per generation phase");
        add(app, "np", "replay batch size");
        add(app, "ne", "prediction updates per target sync");
        add(app, "hidden", "hidden layer widths, comma separated");
        add(app, "eval-slots", "slots of the greedy rollout logged each round");
        add(app, "timing", "record wall-clock seconds (true/false)");
    }

    h::ExperimentConfig resolve(std::map<std::string, std::string>* extra = nullptr) const {
        h::ExperimentConfig cfg;
        std::map<std::string, std::string> merged;
        if (!config_path.empty())
            merged = h::load_config_file(config_path);
        for (const auto& [k, v] : values)
            merged[k] = v;
        // preset first: it resets the scenario before other keys refine it
        if (auto it = merged.find("preset"); it != merged.end())
            h::apply_setting(cfg, "preset", it->second);
        for (const auto& [k, v] : merged) {
            if (k == "preset")
                continue;
            if (extra && is_extra_key(k)) {
                (*extra)[k] = v;
                continue;
            }
            h::apply_setting(cfg, k, v);
        }
        return cfg;
    }

    std::vector<std::string> extra_keys;

private:
    bool is_extra_key(const std::string& k) const {
        for (const auto& e : extra_keys)
            if (e == k)
                return true;
        return false;
    }

    void add(CLI::App& app, const std::string& name, const std::string& help) {
        app.add_option_function<std::string>(
            "--" + name, [this, name](const std::string& v) { values[name] = v; }, help);
    }
};

int run_train(ExperimentFlags& flags, const std::string& out, const std::string& checkpoint) {
    std::map<std::string, std::string> extra;
    flags.extra_keys = {"out", "checkpoint"};
    const auto cfg = flags.resolve(&extra);
    cfg.validate();
    const std::string csv_path = !out.empty() ? out : extra.count("out") ? extra["out"] : "metrics.csv";
    const std::string ck_path = !checkpoint.empty()           ? checkpoint
                                : extra.count("checkpoint") ? extra["checkpoint"]
                                                            : csv_path + ".net";
    const auto r = h::run_train(cfg, csv_path, ck_path);
    if (!r.metrics.empty())
        std::cout << "final throughput " << r.metrics.back().throughput << " after " << r.metrics.back().iteration
                  << " iterations\n";
    std::cout << "metrics: " << csv_path << "\ncheckpoint: " << ck_path << '\n';
    return 0;
}

int run_eval(ExperimentFlags& flags, const std::string& policy, const std::string& checkpoint, std::int64_t slots,
             const std::string& out) {
    const auto cfg = flags.resolve();
    cfg.validate();
    if (slots < 1)
        throw h::ConfigError("--slots must be >= 1");
    double throughput = 0.0;
    std::string label;
    if (!checkpoint.empty()) {
        const auto net = h::load_checkpoint_file(checkpoint);
        throughput = h::eval_network(net, cfg.env(), cfg.train.assist, slots, cfg.train.seed);
        label = checkpoint;
    } else {
        throughput = h::eval_named_policy(policy, cfg.env(), slots, cfg.train.seed);
        label = policy;
    }
    std::ostringstream report;
    report << "policy,preset,relays,buffer,eta,delay,slots,seed,throughput\n"
           << label << ',' << cfg.preset << ',' << cfg.relays << ',' << cfg.buffer << ','
           << h::detail::format_double(cfg.eta) << ',' << cfg.delay << ',' << slots << ',' << cfg.train.seed << ','
           << h::detail::format_double(throughput) << '\n';
    std::cout << report.str();
    if (!out.empty()) {
        std::ofstream os(out);
        if (!(os << report.str()))
            throw std::runtime_error("cannot write " + out);
    }
    return 0;
}

int run_sweep(ExperimentFlags& flags, const std::string& axis, const std::vector<double>& values,
              const std::vector<std::string>& policies, const std::vector<std::uint64_t>& seeds, std::int64_t slots,
              std::size_t workers, const std::string& out) {
    const auto cfg = flags.resolve();
    cfg.validate();
    h::SweepSpec spec;
    spec.axis = h::parse_axis(axis);
    spec.values = values;
    if (policies.empty()) {
        spec.policies.push_back({variant_name(cfg.train.algorithm, cfg.train.assist),
                                 std::pair{cfg.train.algorithm, cfg.train.assist}});
        spec.policies.push_back(h::parse_sweep_policy("max-link"));
    } else {
        for (const auto& p : policies)
            spec.policies.push_back(h::parse_sweep_policy(p));
    }
    if (!seeds.empty())
        spec.seeds = seeds;
    spec.eval_slots = slots;
    spec.workers = workers;
    const auto rows = h::run_sweep(cfg, spec);
    std::ofstream os(out);
    if (!os)
        throw std::runtime_error("cannot write " + out);
    h::write_sweep_csv(os, cfg, spec, rows);
    for (const auto& r : rows)
        std::cout << axis << '=' << r.value << ' ' << r.policy << " median " << r.median << '\n';
    std::cout << "sweep: " << out << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Buffer-aided relay selection with deep reinforcement learning"};
    app.require_subcommand(1);

    ExperimentFlags train_flags, eval_flags, sweep_flags;

    auto* train_cmd = app.add_subcommand("train", "train a learner and log metrics");
    train_flags.add_to(*train_cmd);
    std::string train_out, train_checkpoint;
    train_cmd->add_option("--out", train_out, "metrics CSV path (default metrics.csv)");
    train_cmd->add_option("--checkpoint", train_checkpoint, "network checkpoint path (default <out>.net)");

    auto* eval_cmd = app.add_subcommand("eval", "measure delay-constrained throughput of a policy");
    eval_flags.add_to(*eval_cmd);
    std::string eval_policy = "max-link", eval_checkpoint, eval_out;
    std::int64_t eval_slots = 1000000;
    eval_cmd->add_option("--policy", eval_policy, "max-link, random or none");
    eval_cmd->add_option("--checkpoint", eval_checkpoint, "evaluate a trained network instead of a named policy");
    eval_cmd->add_option("--slots", eval_slots, "slots to simulate");
    eval_cmd->add_option("--out", eval_out, "also write the report CSV here");

    auto* sweep_cmd = app.add_subcommand("sweep", "train and evaluate across one parameter axis");
    sweep_flags.add_to(*sweep_cmd);
    std::string axis = "delay", sweep_out = "sweep.csv";
    std::vector<double> sweep_values;
    std::vector<std::string> sweep_policies;
    std::vector<std::uint64_t> sweep_seeds;
    std::int64_t sweep_slots = 100000;
    std::size_t workers = 0;
    sweep_cmd->add_option("--axis", axis, "delay, rate or relays")->check(CLI::IsMember({"delay", "rate", "relays"}));
    sweep_cmd->add_option("--values", sweep_values, "axis values")->required()->delimiter(',');
    sweep_cmd->add_option("--policies", sweep_policies, "dad-sarsa, dad-ql, punish-sarsa, punish-ql, max-link, random")
        ->delimiter(',');
    sweep_cmd->add_option("--seeds", sweep_seeds, "seeds per point (default 1,2,3)")->delimiter(',');
    sweep_cmd->add_option("--slots", sweep_slots, "evaluation slots per point");
    sweep_cmd->add_option("--workers", workers, "parallel workers (default: all cores)");
    sweep_cmd->add_option("--out", sweep_out, "aggregated CSV path");

    CLI11_PARSE(app, argc, argv);

    try {
        if (train_cmd->parsed())
            return run_train(train_flags, train_out, train_checkpoint);
        if (eval_cmd->parsed())
            return run_eval(eval_flags, eval_policy, eval_checkpoint, eval_slots, eval_out);
        if (sweep_cmd->parsed())
            return run_sweep(sweep_flags, axis, sweep_values, sweep_policies, sweep_seeds, sweep_slots, workers,
                             sweep_out);
    } catch (const h::ConfigError& e) {
        std::cerr << "relaysel: invalid configuration: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "relaysel: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
