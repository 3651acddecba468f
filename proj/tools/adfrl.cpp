// Command-line front end: train / eval / compare / gradcheck / quickstart.
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>

#include "CLI11.hpp"

#include "adfrl/config.hpp"
#include "adfrl/errors.hpp"
#include "adfrl/experiment.hpp"
#include "adfrl/metrics.hpp"
#include "adfrl/nn/gradcheck.hpp"

namespace {

using namespace adfrl;

struct CommonOpts {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    bool dry_run = false;
};

harness::Config load_with_overrides(const CommonOpts& opts) {
    harness::Config cfg = harness::load_config_file(opts.config_path);
    if (opts.seed_set) {
        cfg.seed = opts.seed;
        cfg.validate();
    }
    return cfg;
}

std::string default_out_dir(const harness::Config& cfg) {
    return "runs/" + cfg.name + "-s" + std::to_string(cfg.seed);
}

int cmd_train(const CommonOpts& opts) {
    harness::Config cfg = load_with_overrides(opts);
    const std::string out = opts.out_dir.empty() ? default_out_dir(cfg) : opts.out_dir;
    if (opts.dry_run) {
        std::printf("# resolved configuration (out dir: %s)\n%s", out.c_str(),
                    harness::dump_config(cfg).c_str());
        return 0;
    }
    harness::ExperimentResult res = harness::run_experiment(cfg, out);
    std::printf("detector auc          %.4f\n", res.detector_auc);
    std::printf("reward first 500 mean %.4f\n",
                harness::leading_mean_reward(res.log, 500));
    std::printf("reward last 500 mean  %.4f\n",
                harness::trailing_mean_reward(res.log, 500));
    std::printf("eval block rate       %.4f\n", res.final_eval.block_rate);
    std::printf("eval false positives  %.4f\n", res.final_eval.fpr);
    std::printf("rule updates          %ld (%ld redundant)\n",
                res.train_metrics.rule_updates, res.train_metrics.redundant_updates);
    std::printf("wrote %zu files under %s\n", res.files.size(), out.c_str());
    return 0;
}

int cmd_eval(const CommonOpts& opts, const std::string& checkpoint, std::uint64_t episode,
             long steps) {
    harness::Config cfg = load_with_overrides(opts);
    if (steps > 0) {
        cfg.eval_steps = steps;
        cfg.validate();
    }
    if (opts.dry_run) {
        std::printf("# resolved configuration (checkpoint: %s)\n%s", checkpoint.c_str(),
                    harness::dump_config(cfg).c_str());
        return 0;
    }
    harness::PreparedWorld world = harness::prepare_world(cfg);
    agent::AgentConfig ac = cfg.agent;
    ac.seed = derive_seed(cfg.seed, 5);
    agent::DqnAgent ag(ac, 2 * world.normalizer.dim() + 6,
                       static_cast<int>(cfg.environment.catalog.size()));
    const long step = ag.load(checkpoint);
    harness::EvalResult ev = harness::evaluate_greedy(cfg, world, ag, episode);
    std::printf("checkpoint step  %ld\n", step);
    std::printf("tp %ld  fp %ld  tn %ld  fn %ld\n", ev.counts.tp, ev.counts.fp, ev.counts.tn,
                ev.counts.fn);
    std::printf("block rate %.4f  fpr %.4f  (%ld intervals)\n", ev.block_rate, ev.fpr,
                ev.steps);
    if (!opts.out_dir.empty()) {
        std::filesystem::create_directories(opts.out_dir);
        char buf[192];
        std::snprintf(buf, sizeof(buf),
                      "tp,fp,tn,fn,block_rate,fpr,steps\n%ld,%ld,%ld,%ld,%.9g,%.9g,%ld\n",
                      ev.counts.tp, ev.counts.fp, ev.counts.tn, ev.counts.fn, ev.block_rate,
                      ev.fpr, ev.steps);
        harness::write_text_file(opts.out_dir + "/eval.csv", buf);
        std::printf("wrote %s/eval.csv\n", opts.out_dir.c_str());
    }
    return 0;
}

int cmd_compare(const CommonOpts& opts) {
    harness::Config cfg = load_with_overrides(opts);
    if (opts.dry_run) {
        std::printf("# resolved configuration\n%s", harness::dump_config(cfg).c_str());
        return 0;
    }
    const std::string out = opts.out_dir.empty() ? default_out_dir(cfg) : opts.out_dir;
    harness::CompareResult res = harness::compare_baseline(cfg, out);
    std::printf("%s", harness::compare_csv(res).c_str());
    std::printf("adaptive fpr <= baseline fpr: %s\n",
                res.adaptive_fpr <= res.baseline_fpr ? "yes" : "no");
    return 0;
}

int cmd_gradcheck(std::uint64_t seed, double tolerance) {
    // Detector stack (LSTM -> conv+ReLU -> head) against a binary
    // cross-entropy loss on one random window.
    detector::DetectorHyper hyper;
    hyper.input_dim = 8;
    hyper.hidden = 4;
    hyper.kernel = 3;
    hyper.channels = 4;
    detector::DetectorModel model(hyper);
    model.init(derive_seed(seed, 0));

    Rng rng(derive_seed(seed, 1));
    std::vector<nn::Vec> window(6, nn::Vec(8));
    for (auto& row : window)
        for (auto& v : row) v = rng.uniform01();

    detector::DetectorModel::ForwardCaches caches;
    auto det_loss = [&]() {
        const double logit = model.forward_logit(window, &caches);
        return std::log1p(std::exp(logit)); // -log(1 - sigmoid(logit)), label 0
    };
    auto det_backward = [&]() {
        const double logit = model.forward_logit(window, &caches);
        model.backward_from_logit(1.0 / (1.0 + std::exp(-logit)), caches);
    };
    std::vector<nn::ParamRef> det_params = model.params();
    nn::GradCheckReport det_report =
        nn::gradient_check(det_params, det_loss, det_backward, tolerance);

    // Q-network style MLP against a squared-error loss.
    nn::Mlp mlp(10, {16, 16}, 4, "q");
    Rng mrng(derive_seed(seed, 2));
    mlp.init_uniform(mrng);
    nn::Vec x(10), target(4);
    for (auto& v : x) v = mrng.uniform(-1.0, 1.0);
    for (auto& v : target) v = mrng.uniform(-1.0, 1.0);

    nn::Mlp::Cache mcache;
    auto mlp_loss = [&]() {
        nn::Vec y = mlp.forward(x, &mcache);
        double loss = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) {
            const double d = y[i] - target[i];
            loss += 0.5 * d * d;
        }
        return loss;
    };
    auto mlp_backward = [&]() {
        nn::Vec y = mlp.forward(x, &mcache);
        nn::Vec grad(y.size());
        for (std::size_t i = 0; i < y.size(); ++i) grad[i] = y[i] - target[i];
        mlp.backward(grad, mcache);
    };
    std::vector<nn::ParamRef> mlp_params = mlp.params();
    nn::GradCheckReport mlp_report =
        nn::gradient_check(mlp_params, mlp_loss, mlp_backward, tolerance);

    std::printf("detector stack: %zu entries, max rel err %.3e (%s)\n", det_report.checked,
                det_report.max_rel_err, det_report.ok() ? "ok" : "FAIL");
    std::printf("q-network mlp:  %zu entries, max rel err %.3e (%s)\n", mlp_report.checked,
                mlp_report.max_rel_err, mlp_report.ok() ? "ok" : "FAIL");
    if (!det_report.ok() || !mlp_report.ok()) {
        const nn::GradCheckEntry& w =
            det_report.ok() ? mlp_report.worst : det_report.worst;
        std::fprintf(stderr, "worst entry: %s[%zu] analytic %.6e numeric %.6e\n",
                     w.param.c_str(), w.index, w.analytic, w.numeric);
        return 1;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"adaptive firewall policy training on simulated flow traffic"};
    app.require_subcommand(1);

    CommonOpts train_opts, eval_opts, compare_opts, quick_opts;
    std::string eval_checkpoint;
    std::uint64_t eval_episode = 0;
    long eval_steps = 0;
    std::uint64_t gc_seed = 1;
    double gc_tolerance = 1e-4;

    auto add_common = [](CLI::App* sub, CommonOpts& o, bool config_required) {
        auto* copt = sub->add_option("--config", o.config_path, "key=value config file");
        if (config_required) copt->required();
        sub->add_option("--out", o.out_dir, "output directory");
        sub->add_option("--seed", o.seed, "override experiment.seed")
            ->each([&o](const std::string&) { o.seed_set = true; });
        sub->add_flag("--dry-run", o.dry_run, "print the resolved config and exit");
    };

    CLI::App* train = app.add_subcommand("train", "train an agent and write run outputs");
    add_common(train, train_opts, true);

    CLI::App* eval = app.add_subcommand("eval", "greedy evaluation of a saved agent");
    add_common(eval, eval_opts, true);
    eval->add_option("--checkpoint", eval_checkpoint, "agent checkpoint path")->required();
    eval->add_option("--episode", eval_episode, "evaluation episode index");
    eval->add_option("--steps", eval_steps, "override experiment.eval_steps");

    CLI::App* compare =
        app.add_subcommand("compare", "adaptive policy vs static-threshold baseline");
    add_common(compare, compare_opts, true);

    CLI::App* gradcheck =
        app.add_subcommand("gradcheck", "finite-difference check of all backward passes");
    gradcheck->add_option("--seed", gc_seed, "scenario seed");
    gradcheck->add_option("--tolerance", gc_tolerance, "max relative error");

    CLI::App* quick = app.add_subcommand("quickstart", "end-to-end demo run");
    add_common(quick, quick_opts, false);

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) return cmd_train(train_opts);
        if (eval->parsed())
            return cmd_eval(eval_opts, eval_checkpoint, eval_episode, eval_steps);
        if (compare->parsed()) return cmd_compare(compare_opts);
        if (gradcheck->parsed()) return cmd_gradcheck(gc_seed, gc_tolerance);
        if (quick->parsed()) {
            if (quick_opts.config_path.empty())
                quick_opts.config_path = "configs/quickstart.conf";
            if (quick_opts.out_dir.empty()) quick_opts.out_dir = "runs/quickstart";
            return cmd_train(quick_opts);
        }
    } catch (const adfrl::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const adfrl::UsageError& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return 2;
    } catch (const adfrl::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
