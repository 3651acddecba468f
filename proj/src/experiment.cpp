#include "adfrl/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "adfrl/errors.hpp"

namespace adfrl::harness {

namespace {

// Sub-stream allocation of the experiment seed. Everything ultimately
// derives from experiment.seed, so one number reproduces the whole run.
enum SeedStream : std::uint64_t {
    kSeedCalibration = 0,
    kSeedDetectorInit = 1,
    kSeedDetectorTrain = 2,
    kSeedHoldout = 3,
    kSeedTrainSource = 4,
    kSeedAgent = 5,
    kSeedEvalSource = 6,
};

std::vector<traffic::FeatureVector> featurize(const Config& cfg,
                                              std::span<const traffic::FlowRecord> records,
                                              const traffic::Normalizer& norm) {
    traffic::FeatureExtractor ex(cfg.feature_horizon_sec);
    std::vector<traffic::FeatureVector> out;
    out.reserve(records.size());
    for (const auto& rec : records) {
        std::vector<double> raw =
            cfg.feature_passthrough ? rec.extra : ex.raw_features(rec);
        traffic::FeatureVector fv;
        fv.values = norm.apply(raw);
        fv.label = rec.label;
        out.push_back(std::move(fv));
    }
    return out;
}

int window_label(const traffic::TrafficWindow& w, bool majority) {
    return (majority ? w.majority_malicious() : w.any_malicious()) ? 1 : 0;
}

std::size_t eval_flow_budget(const Config& cfg) {
    const double expected = static_cast<double>(cfg.eval_steps) * cfg.environment.interval_sec *
                            cfg.synthetic.flows_per_sec;
    return static_cast<std::size_t>(cfg.environment.window_len) +
           static_cast<std::size_t>(std::ceil(expected * 2.0)) + 64;
}

// The exact flow sequence an evaluation episode will consume, so the static
// baseline can be judged on identical traffic.
std::vector<traffic::FlowRecord> eval_flows(const Config& cfg, const PreparedWorld& world,
                                            std::uint64_t episode) {
    if (cfg.traffic_source == "csv") return world.replay_records;
    return traffic::generate_synthetic(
        cfg.synthetic, derive_seed(derive_seed(cfg.seed, kSeedEvalSource), episode),
        eval_flow_budget(cfg));
}

struct TrainedAgent {
    std::unique_ptr<agent::DqnAgent> agent;
    env::TrainingLog log;
    std::string final_ruleset;
};

std::unique_ptr<env::FlowSource> make_training_source(const Config& cfg,
                                                      const PreparedWorld& world) {
    if (cfg.traffic_source == "csv") {
        if (world.replay_records.empty())
            throw ConfigError("csv source has no rows left after calibration");
        return std::make_unique<env::VectorSource>(world.replay_records);
    }
    return std::make_unique<env::SyntheticSource>(cfg.synthetic,
                                                  derive_seed(cfg.seed, kSeedTrainSource));
}

TrainedAgent train_agent(const Config& cfg, const PreparedWorld& world) {
    env::Environment environment =
        make_environment(cfg, world, make_training_source(cfg, world));

    agent::AgentConfig ac = cfg.agent;
    ac.seed = derive_seed(cfg.seed, kSeedAgent);
    TrainedAgent out;
    out.agent = std::make_unique<agent::DqnAgent>(ac, environment.state_dim(),
                                                  environment.action_count());

    env::RunSettings rs;
    rs.total_steps = cfg.total_steps;
    rs.eval_every = cfg.eval_every;
    if (cfg.eval_every > 0) {
        const Config* cp = &cfg;
        const PreparedWorld* wp = &world;
        rs.eval_hook = [cp, wp](long step, agent::DqnAgent& ag) {
            EvalResult ev = evaluate_greedy(*cp, *wp, ag, static_cast<std::uint64_t>(step));
            return env::TrainingLog::Snapshot{step, ev.block_rate, ev.fpr};
        };
    }
    out.log = env::run_training(environment, *out.agent, rs);
    out.final_ruleset = fw::serialize_ruleset(environment.ruleset());
    return out;
}

std::string eval_csv(const EvalResult& ev) {
    char buf[192];
    std::snprintf(buf, sizeof(buf), "tp,fp,tn,fn,block_rate,fpr,steps\n%ld,%ld,%ld,%ld,%.9g,%.9g,%ld\n",
                  ev.counts.tp, ev.counts.fp, ev.counts.tn, ev.counts.fn, ev.block_rate,
                  ev.fpr, ev.steps);
    return buf;
}

} // namespace

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << content;
    if (!out) throw IoError("write failed for '" + path + "'");
}

PreparedWorld prepare_world(const Config& cfg) {
    PreparedWorld world{detector::DetectorModel(cfg.detector), {}, 0.0, {}, {}, {}, {}};

    if (cfg.traffic_source == "csv") {
        traffic::CsvReadResult read = traffic::read_flow_csv(cfg.csv_path, cfg.schema);
        if (static_cast<long>(read.records.size()) <= cfg.calibration_flows)
            throw ConfigError("csv file '" + cfg.csv_path +
                              "' has too few usable rows for calibration plus replay");
        world.calibration_records.assign(read.records.begin(),
                                         read.records.begin() + cfg.calibration_flows);
        world.replay_records.assign(read.records.begin() + cfg.calibration_flows,
                                    read.records.end());
    } else {
        world.calibration_records = traffic::generate_synthetic(
            cfg.synthetic, derive_seed(cfg.seed, kSeedCalibration),
            static_cast<std::size_t>(cfg.calibration_flows));
    }

    // Fit min-max scaling on raw calibration features.
    {
        traffic::FeatureExtractor ex(cfg.feature_horizon_sec);
        std::vector<std::vector<double>> raw;
        raw.reserve(world.calibration_records.size());
        for (const auto& rec : world.calibration_records)
            raw.push_back(cfg.feature_passthrough ? rec.extra : ex.raw_features(rec));
        world.normalizer.fit(raw);
    }

    std::vector<traffic::FeatureVector> stream =
        featurize(cfg, world.calibration_records, world.normalizer);
    world.calibration_windows =
        traffic::make_windows(stream, cfg.environment.window_len, cfg.detector_stride);
    if (world.calibration_windows.empty())
        throw ConfigError("traffic.calibration_flows yields no full training window");

    detector::DetectorHyper hyper = cfg.detector;
    hyper.input_dim = world.normalizer.dim();
    world.detector = detector::DetectorModel(hyper);
    world.detector.init(derive_seed(cfg.seed, kSeedDetectorInit));
    world.detector_report = detector::train(world.detector, world.calibration_windows,
                                            derive_seed(cfg.seed, kSeedDetectorTrain));

    // Score discrimination on held-out traffic when we can generate it.
    std::vector<traffic::TrafficWindow> auc_windows;
    if (cfg.traffic_source == "csv") {
        auc_windows = world.calibration_windows;
    } else {
        std::vector<traffic::FlowRecord> holdout = traffic::generate_synthetic(
            cfg.synthetic, derive_seed(cfg.seed, kSeedHoldout),
            static_cast<std::size_t>(
                std::max<long>(cfg.calibration_flows / 2, cfg.environment.window_len * 8L)));
        std::vector<traffic::FeatureVector> hstream =
            featurize(cfg, holdout, world.normalizer);
        auc_windows =
            traffic::make_windows(hstream, cfg.environment.window_len, cfg.detector_stride);
    }
    std::vector<double> scores;
    std::vector<int> labels;
    scores.reserve(auc_windows.size());
    labels.reserve(auc_windows.size());
    for (const auto& w : auc_windows) {
        scores.push_back(world.detector.score(w).omega);
        labels.push_back(window_label(w, hyper.majority_label));
    }
    try {
        world.detector_auc = auc(scores, labels);
    } catch (const UsageError&) {
        world.detector_auc = 0.5; // single-class traffic: no discrimination task
    }
    return world;
}

env::Environment make_environment(const Config& cfg, const PreparedWorld& world,
                                  std::unique_ptr<env::FlowSource> source) {
    traffic::FeaturePipeline pipeline(world.normalizer, cfg.feature_horizon_sec,
                                      cfg.feature_passthrough);
    return env::Environment(cfg.environment, &world.detector, std::move(pipeline),
                            std::move(source));
}

EvalResult evaluate_greedy(const Config& cfg, const PreparedWorld& world,
                           const agent::DqnAgent& agent, std::uint64_t episode) {
    env::Environment e = make_environment(
        cfg, world, std::make_unique<env::VectorSource>(eval_flows(cfg, world, episode)));
    env::EnvState st = e.reset(0);
    EvalResult ev;
    for (long i = 0; i < cfg.eval_steps; ++i) {
        const int a = agent.greedy(st.flatten());
        env::Environment::StepResult sr = e.step(a);
        ev.counts.tp += sr.outcome.tp;
        ev.counts.fp += sr.outcome.fp;
        ev.counts.tn += sr.outcome.tn;
        ev.counts.fn += sr.outcome.fn;
        ++ev.steps;
        if (sr.episode_end) break;
        st = sr.state;
    }
    ev.block_rate = recall(ev.counts);
    ev.fpr = fpr(ev.counts);
    return ev;
}

ExperimentResult run_experiment(const Config& cfg, const std::string& out_dir) {
    PreparedWorld world = prepare_world(cfg);
    TrainedAgent trained = train_agent(cfg, world);

    ExperimentResult res;
    res.log = std::move(trained.log);
    res.train_metrics = compute_metrics(res.log);
    res.detector_report = world.detector_report;
    res.detector_auc = world.detector_auc;
    res.final_eval = evaluate_greedy(cfg, world, *trained.agent, 0);
    res.ruleset_text = trained.final_ruleset;

    if (!out_dir.empty()) {
        namespace fs = std::filesystem;
        fs::create_directories(fs::path(out_dir) / "checkpoints");
        auto emit = [&res, &out_dir](const std::string& name, const std::string& content) {
            const std::string path = (std::filesystem::path(out_dir) / name).string();
            write_text_file(path, content);
            res.files.push_back(path);
        };
        emit("config.txt", dump_config(cfg));
        emit("metrics.csv", metrics_csv(res.train_metrics));
        emit("train_log.csv", env::training_log_csv(res.log));
        emit("reward_curve.csv", reward_curve_csv(res.log, 100));
        emit("detector_report.csv", detector::train_report_csv(res.detector_report));
        emit("eval.csv", eval_csv(res.final_eval));
        emit("ruleset.txt", res.ruleset_text);
        {
            char buf[384];
            std::snprintf(buf, sizeof(buf),
                          "name %s\nseed %llu\nsteps %ld\ndetector_auc %.6f\n"
                          "eval_block_rate %.6f\neval_fpr %.6f\ncumulative_reward %.6f\n"
                          "rule_updates %ld\nredundant_updates %ld\n",
                          cfg.name.c_str(), static_cast<unsigned long long>(cfg.seed),
                          cfg.total_steps, res.detector_auc, res.final_eval.block_rate,
                          res.final_eval.fpr, res.train_metrics.cumulative_reward,
                          res.train_metrics.rule_updates, res.train_metrics.redundant_updates);
            emit("summary.txt", buf);
        }
        const std::string agent_ckpt =
            (std::filesystem::path(out_dir) / "checkpoints" / "agent.ckpt").string();
        trained.agent->save(agent_ckpt, cfg.total_steps);
        res.files.push_back(agent_ckpt);
        const std::string det_ckpt =
            (std::filesystem::path(out_dir) / "checkpoints" / "detector.ckpt").string();
        world.detector.save(det_ckpt);
        res.files.push_back(det_ckpt);
    }
    return res;
}

fw::RuleSet static_baseline_rules(const std::vector<traffic::TrafficWindow>& windows,
                                  const std::vector<traffic::FlowRecord>& records,
                                  const detector::DetectorModel& det, double threshold,
                                  int stride) {
    if (stride < 1) throw UsageError("static_baseline_rules: stride must be >= 1");
    std::set<std::uint32_t> flagged_sources; // ordered for determinism
    for (const auto& w : windows) {
        if (det.score(w).omega <= threshold) continue;
        const std::size_t begin = w.window_index * static_cast<std::size_t>(stride);
        const std::size_t end = begin + w.features.size();
        if (end > records.size())
            throw UsageError("static_baseline_rules: window indices exceed record list");
        for (std::size_t i = begin; i < end; ++i) flagged_sources.insert(records[i].src_addr);
    }
    fw::RuleSet rules(fw::Verdict::ALLOW);
    int id = 1;
    for (std::uint32_t addr : flagged_sources) {
        fw::Rule r;
        r.id = id++;
        r.src_match = fw::AddrPred::exact(addr);
        r.verdict = fw::Verdict::DENY;
        rules.insert_rule(r, rules.size());
    }
    return rules;
}

EvalCounts replay_ruleset(fw::RuleSet rules, std::span<const traffic::FlowRecord> flows) {
    EvalCounts c;
    long step = 0;
    for (const auto& rec : flows) {
        const bool denied = rules.evaluate(rec, step++).verdict == fw::Verdict::DENY;
        const bool malicious = rec.label == traffic::Label::MALICIOUS;
        if (denied && malicious) ++c.tp;
        else if (denied && !malicious) ++c.fp;
        else if (!denied && malicious) ++c.fn;
        else ++c.tn;
    }
    return c;
}

CompareResult compare_baseline(const Config& cfg, const std::string& out_dir) {
    PreparedWorld world = prepare_world(cfg);
    TrainedAgent trained = train_agent(cfg, world);

    // Both arms judge the identical flow sequence of evaluation episode 0.
    std::vector<traffic::FlowRecord> flows = eval_flows(cfg, world, 0);
    env::Environment e = make_environment(cfg, world,
                                          std::make_unique<env::VectorSource>(flows));
    env::EnvState st = e.reset(0);
    CompareResult res;
    for (long i = 0; i < cfg.eval_steps; ++i) {
        const int a = trained.agent->greedy(st.flatten());
        env::Environment::StepResult sr = e.step(a);
        res.adaptive.tp += sr.outcome.tp;
        res.adaptive.fp += sr.outcome.fp;
        res.adaptive.tn += sr.outcome.tn;
        res.adaptive.fn += sr.outcome.fn;
        if (sr.episode_end) break;
        st = sr.state;
    }

    fw::RuleSet base = static_baseline_rules(world.calibration_windows,
                                             world.calibration_records, world.detector,
                                             cfg.environment.anomaly_threshold,
                                             cfg.detector_stride);
    res.baseline_rule_count = base.size();

    // The adaptive arm judged exactly counts.total() flows after the W-flow
    // preamble; replay the same slice through the static rules.
    const std::size_t preamble = static_cast<std::size_t>(cfg.environment.window_len);
    const std::size_t judged = static_cast<std::size_t>(res.adaptive.total());
    if (preamble + judged > flows.size())
        throw StateError("compare_baseline: judged more flows than were generated");
    res.baseline = replay_ruleset(std::move(base),
                                  std::span<const traffic::FlowRecord>(flows).subspan(
                                      preamble, judged));

    res.adaptive_fpr = fpr(res.adaptive);
    res.baseline_fpr = fpr(res.baseline);
    res.adaptive_recall = recall(res.adaptive);
    res.baseline_recall = recall(res.baseline);

    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        const std::string path = (std::filesystem::path(out_dir) / "compare.csv").string();
        write_text_file(path, compare_csv(res));
        res.files.push_back(path);
    }
    return res;
}

std::string compare_csv(const CompareResult& r) {
    char buf[384];
    std::snprintf(buf, sizeof(buf),
                  "arm,tp,fp,tn,fn,recall,fpr,rules\n"
                  "adaptive,%ld,%ld,%ld,%ld,%.9g,%.9g,\n"
                  "baseline,%ld,%ld,%ld,%ld,%.9g,%.9g,%zu\n",
                  r.adaptive.tp, r.adaptive.fp, r.adaptive.tn, r.adaptive.fn,
                  r.adaptive_recall, r.adaptive_fpr, r.baseline.tp, r.baseline.fp,
                  r.baseline.tn, r.baseline.fn, r.baseline_recall, r.baseline_fpr,
                  r.baseline_rule_count);
    return buf;
}

} // namespace adfrl::harness
