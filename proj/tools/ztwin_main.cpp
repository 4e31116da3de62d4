#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ztwin/harness.hpp"

namespace {

namespace fs = std::filesystem;
using namespace ztwin;

struct CommonOpts {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "JSON configuration file");
    cmd->add_option("--seed", opts.seed, "override the configured seed");
    cmd->add_option("--out", opts.out_dir, "override the output directory");
}

harness::ScenarioConfig make_config(const CommonOpts& opts) {
    harness::ScenarioConfig cfg;
    if (!opts.config_path.empty()) cfg = harness::load_config(opts.config_path);
    if (opts.seed) cfg.seed = *opts.seed;
    if (opts.out_dir) cfg.out_dir = *opts.out_dir;
    return cfg;
}

int cmd_generate(const CommonOpts& opts) {
    const auto cfg = make_config(opts);
    cfg.validate();
    Rng rng(cfg.seed);
    traffic::TrafficParams tp;
    tp.lambda = cfg.traffic.lambda;
    tp.unit_size = cfg.traffic.unit_size;
    tp.length = cfg.traffic.length;
    const auto series = traffic::generate_series(tp, rng);
    fs::create_directories(cfg.out_dir);
    const auto path = fs::path(cfg.out_dir) / "series.csv";
    traffic::write_series_csv(path.string(), series);
    std::cout << "wrote " << path.string() << " (" << series.values.size() << " samples)\n";
    return 0;
}

int cmd_train(const CommonOpts& opts) {
    const auto cfg = make_config(opts);
    const auto art = harness::train_artifacts(cfg, /*force_model=*/true);
    fs::create_directories(cfg.out_dir);
    const fs::path dir(cfg.out_dir);
    predictor::save_bundle(art.bundle, (dir / cfg.paths.bundle).string());
    agent::save_qtable((dir / cfg.paths.qtable).string(), art.states, art.actions, art.qtable);
    std::string csv = "epoch,mse\n";
    for (std::size_t i = 0; i < art.loss_history.size(); ++i) {
        csv += format_int(static_cast<long long>(i + 1)) + "," +
               format_double(art.loss_history[i]) + "\n";
    }
    write_text_file((dir / "training_loss.csv").string(), csv);
    std::cout << "wrote " << (dir / cfg.paths.bundle).string() << "\n";
    std::cout << "wrote " << (dir / cfg.paths.qtable).string() << "\n";
    std::cout << "final training mse " << format_double(art.loss_history.back()) << "\n";
    return 0;
}

int cmd_run(harness::ScenarioConfig cfg) {
    if (cfg.name == "compare") {
        const auto rep = harness::compare_techniques(cfg);
        harness::emit_compare_report(rep, cfg, std::cout);
        return 0;
    }
    const auto rep = harness::run_scenario(cfg);
    harness::emit_scenario_report(rep, std::cout);
    return 0;
}

int cmd_whatif(const CommonOpts& opts, double state_kbps) {
    const auto cfg = make_config(opts);
    cfg.validate();
    if (state_kbps <= 0.0) throw ConfigError("state must be > 0");

    const fs::path dir(cfg.out_dir);
    agent::StateSpace states{cfg.states.levels, cfg.states.step};
    auto actions = agent::ActionSpace::make_range(cfg.actions.min, cfg.actions.max,
                                                  cfg.actions.step);
    agent::RewardParams rp;
    rp.overshoot_penalty = cfg.overshoot_penalty;
    agent::QTable qtable;
    const auto qpath = dir / cfg.paths.qtable;
    if (fs::exists(qpath)) {
        auto file = agent::load_qtable(qpath.string());
        states = std::move(file.states);
        actions = std::move(file.actions);
        qtable = std::move(file.q);
    } else {
        agent::AgentTrainParams tp;
        tp.episodes = cfg.agent.episodes;
        tp.alpha = cfg.agent.alpha;
        tp.gamma = cfg.agent.gamma;
        tp.epsilon_start = cfg.agent.epsilon_start;
        tp.epsilon_end = cfg.agent.epsilon_end;
        tp.seed = cfg.seed + 2;
        const auto trace = netsim::to_capacity_vector(
            cfg.schedule ? *cfg.schedule : harness::default_schedule("default"));
        qtable = agent::train_agent(trace, states, actions, rp, tp);
    }

    // The evaluation never consults the sequence model, so a zeroed one is
    // enough to assemble the twin.
    predictor::PredictorBundle bundle;
    bundle.model.hidden = 1;
    bundle.model.L = cfg.predictor.window;
    bundle.model.params.assign(predictor::BiLstmModel::total_params(1), 0.0);
    bundle.scaler = {0.0, 1.0};
    bundle.memory = predictor::MemoryModule(static_cast<std::size_t>(cfg.predictor.memory_capacity));
    bundle.delta_kbps = cfg.predictor.delta_kbps;
    netsim::LinkModel link;
    link.congestion_beta = cfg.congestion_beta;
    twin::TwinConfig tc;
    tc.whatif_episodes = cfg.twin.whatif_episodes;
    tc.whatif_steps = cfg.twin.whatif_steps;
    auto tw = twin::make_twin(std::move(bundle), std::move(states), std::move(actions),
                              std::move(qtable), rp, link, tc);

    const auto dbpath = dir / cfg.paths.db;
    if (fs::exists(dbpath)) tw.db = twin::load_db(dbpath.string());

    const auto entry = twin::what_if(tw, state_kbps);
    fs::create_directories(dir);
    twin::save_db(tw.db, dbpath.string());
    agent::save_qtable(qpath.string(), tw.states, tw.actions, tw.qtable);
    std::cout << "state " << format_double(entry.state_kbps) << " -> action "
              << format_double(entry.action_kbps) << " (origin " << twin::origin_name(entry.origin)
              << ", occurrences " << entry.occurrences << ")\n";
    std::cout << "wrote " << dbpath.string() << "\n";
    return 0;
}

int cmd_inspect(const CommonOpts& opts) {
    const auto cfg = make_config(opts);
    const auto dbpath = fs::path(cfg.out_dir) / cfg.paths.db;
    const auto db = twin::load_db(dbpath.string());
    std::cout << "state_kbps    action_kbps   origin     occurrences\n";
    for (const auto& [key, e] : db.entries) {
        std::string state = format_double(e.state_kbps);
        state.resize(14, ' ');
        std::string action = format_double(e.action_kbps);
        action.resize(14, ' ');
        std::string origin = twin::origin_name(e.origin);
        origin.resize(11, ' ');
        std::cout << state << action << origin << e.occurrences << "\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"closed-loop bandwidth management sandbox"};
    app.require_subcommand(1);

    CommonOpts opts;
    bool print_defaults = false;
    std::string scenario;
    double whatif_state = 0.0;

    auto* generate = app.add_subcommand("generate", "write the demand series");
    add_common(generate, opts);
    generate->add_flag("--print-defaults", print_defaults,
                       "print the default configuration and exit");

    auto* train = app.add_subcommand("train", "train the predictor and the policy");
    add_common(train, opts);

    auto* run = app.add_subcommand("run", "run a closed-loop scenario");
    add_common(run, opts);
    run->add_option("--scenario", scenario, "default, what_if, adaptive, or compare");

    auto* compare = app.add_subcommand("compare", "compare the five management stages");
    add_common(compare, opts);

    auto* whatif = app.add_subcommand("what-if", "evaluate a bandwidth level offline");
    add_common(whatif, opts);
    whatif->add_option("--state", whatif_state, "level to evaluate, Kbps")->required();

    auto* inspect = app.add_subcommand("inspect-db", "print the action database");
    add_common(inspect, opts);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (generate->parsed()) {
            if (print_defaults) {
                std::cout << harness::config_to_json(harness::ScenarioConfig{}).dump(2) << "\n";
                return 0;
            }
            return cmd_generate(opts);
        }
        if (train->parsed()) return cmd_train(opts);
        if (run->parsed()) {
            auto cfg = make_config(opts);
            if (run->count("--scenario") > 0) cfg.name = scenario;
            return cmd_run(std::move(cfg));
        }
        if (compare->parsed()) {
            auto cfg = make_config(opts);
            cfg.name = "compare";
            return cmd_run(std::move(cfg));
        }
        if (whatif->parsed()) return cmd_whatif(opts, whatif_state);
        if (inspect->parsed()) return cmd_inspect(opts);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
