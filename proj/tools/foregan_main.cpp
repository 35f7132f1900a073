// foregan: train a background GAN, recover backgrounds by latent inversion,
// segment foreground masks, and score them.

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "foregan/foregan.hpp"

namespace fs = std::filesystem;
using namespace foregan;

namespace {

struct CliError {
    int code;
    std::string message;
};

// Files already on disk when a command fails mid-write; enumerated on
// stderr so callers can clean up.
struct WriteLedger {
    std::vector<std::string> written;

    void note(const std::string& path) { written.push_back(path); }
    void dump_on_error() const {
        if (written.empty()) return;
        std::cerr << "files written before the failure:\n";
        for (const auto& p : written) std::cerr << "  " << p << "\n";
    }
};

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << content;
    if (!out) throw IoError("short write: " + path);
}

SequenceLayout parse_layout(const std::string& s) {
    if (s == "flat") return SequenceLayout::FlatFrames;
    if (s == "wallflower") return SequenceLayout::WallflowerStyle;
    throw CliError{2, "unknown layout '" + s + "' (expected flat|wallflower)"};
}

GanModel load_checkpoint(const std::string& path) {
    try {
        return load_model(path);
    } catch (const std::exception& e) {
        throw CliError{3, std::string("checkpoint: ") + e.what()};
    }
}

void save_checkpoint(const std::string& path, const GanModel& model) {
    try {
        save_model(path, model);
    } catch (const std::exception& e) {
        throw CliError{3, std::string("checkpoint: ") + e.what()};
    }
}

// Command line beats the config file, which beats built-in defaults.
struct ConfigLayer {
    std::map<std::string, CLI::Option*> options;
    std::map<std::string, std::string> file;

    void load(const std::string& path) {
        std::set<std::string> allowed;
        for (const auto& [key, opt] : options) allowed.insert(key);
        file = parse_config_file(path, allowed);
    }
    bool from_file(const std::string& key) const {
        const auto it = options.find(key);
        return file.contains(key) && it != options.end() && it->second->count() == 0;
    }
    void apply_int(const std::string& key, int& var) const {
        if (from_file(key)) var = config_int(file, key, var);
    }
    void apply_float(const std::string& key, float& var) const {
        if (from_file(key)) var = config_float(file, key, var);
    }
    void apply_u64(const std::string& key, std::uint64_t& var) const {
        if (from_file(key)) var = config_u64(file, key, var);
    }
    void apply_str(const std::string& key, std::string& var) const {
        if (from_file(key)) var = config_str(file, key, var);
    }
};

SegConfig make_seg_config(const std::string& mode, float tau, int median_radius) {
    SegConfig scfg;
    if (mode == "otsu")
        scfg.threshold_mode = ThresholdMode::Otsu;
    else if (mode == "fixed")
        scfg.threshold_mode = ThresholdMode::Fixed;
    else
        throw CliError{2, "unknown threshold-mode '" + mode + "' (expected otsu|fixed)"};
    scfg.fixed_tau = tau;
    scfg.median_radius = median_radius;
    return scfg;
}

// ---------------------------------------------------------------- train ---

struct TrainArgs {
    std::string data, out = "model.fgan", loss_csv = "train_loss.csv", config;
    int size = 64;
    TrainConfig cfg;
};

int run_train(const TrainArgs& a0, const ConfigLayer& layer) {
    TrainArgs a = a0;
    layer.apply_str("data", a.data);
    layer.apply_str("out", a.out);
    layer.apply_str("loss-csv", a.loss_csv);
    layer.apply_int("size", a.size);
    layer.apply_int("steps", a.cfg.steps);
    layer.apply_int("batch-size", a.cfg.batch_size);
    layer.apply_int("latent-dim", a.cfg.latent_dim);
    layer.apply_float("lr", a.cfg.lr);
    layer.apply_float("beta1", a.cfg.adam_beta1);
    layer.apply_float("beta2", a.cfg.adam_beta2);
    layer.apply_u64("seed", a.cfg.seed);
    if (a.data.empty()) throw CliError{2, "train: --data is required"};

    Sequence raw = load_sequence(a.data, SequenceLayout::FlatFrames);
    if (raw.frames.empty()) throw CliError{2, "train: no frames in " + a.data};
    const Sequence frames = preprocess_sequence(raw, a.size);

    const int every = std::max(1, a.cfg.steps / 20);
    auto progress = [&](int step, float d_loss, float g_loss) {
        if (step % every == 0 || step + 1 == a.cfg.steps)
            std::fprintf(stderr, "step %d/%d d_loss=%.4f g_loss=%.4f\n", step + 1, a.cfg.steps,
                         d_loss, g_loss);
    };
    auto [model, history] = train(frames, a.cfg, progress);

    WriteLedger ledger;
    try {
        save_checkpoint(a.out, model);
        ledger.note(a.out);
        std::string csv = "step,d_loss,g_loss\n";
        for (std::size_t i = 0; i < history.size(); ++i)
            csv += std::to_string(i) + "," + std::to_string(history[i].first) + "," +
                   std::to_string(history[i].second) + "\n";
        write_text_file(a.loss_csv, csv);
        ledger.note(a.loss_csv);
    } catch (...) {
        ledger.dump_on_error();
        throw;
    }
    std::cout << "trained " << a.cfg.steps << " steps on " << frames.size() << " frames; wrote "
              << a.out << " and " << a.loss_csv << "\n";
    return 0;
}

// -------------------------------------------------------------- segment ---

struct SegmentArgs {
    std::string model, data, out = "masks", losses_csv = "inversion_loss.csv";
    std::string dump_backgrounds, dump_trajectories, layout = "flat", config;
    std::string threshold_mode = "otsu";
    float fixed_tau = 0.5f;
    int median_radius = 1;
    int jobs = 1;
    InversionConfig icfg;
    int optimizer_is_plain = 0;
};

int run_segment(const SegmentArgs& a0, const ConfigLayer& layer) {
    SegmentArgs a = a0;
    layer.apply_str("model", a.model);
    layer.apply_str("data", a.data);
    layer.apply_str("out", a.out);
    layer.apply_str("losses-csv", a.losses_csv);
    layer.apply_str("dump-backgrounds", a.dump_backgrounds);
    layer.apply_str("dump-trajectories", a.dump_trajectories);
    layer.apply_str("layout", a.layout);
    layer.apply_str("threshold-mode", a.threshold_mode);
    layer.apply_float("fixed-tau", a.fixed_tau);
    layer.apply_int("median-radius", a.median_radius);
    layer.apply_int("jobs", a.jobs);
    layer.apply_int("steps", a.icfg.steps);
    layer.apply_float("lr", a.icfg.lr);
    layer.apply_int("restarts", a.icfg.restarts);
    layer.apply_u64("seed", a.icfg.seed);
    {
        std::string opt = a.optimizer_is_plain ? "plain" : "adam";
        layer.apply_str("optimizer", opt);
        if (opt == "plain")
            a.icfg.optimizer = InversionOptimizer::PlainGradient;
        else if (opt == "adam")
            a.icfg.optimizer = InversionOptimizer::Adam;
        else
            throw CliError{2, "unknown optimizer '" + opt + "' (expected adam|plain)"};
    }
    if (a.model.empty()) throw CliError{2, "segment: --model is required"};
    if (a.data.empty()) throw CliError{2, "segment: --data is required"};
    if (a.jobs < 1) throw CliError{2, "segment: --jobs must be >= 1"};
    const SegConfig scfg = make_seg_config(a.threshold_mode, a.fixed_tau, a.median_radius);

    const GanModel model = load_checkpoint(a.model);
    model.freeze();
    Sequence raw = load_sequence(a.data, parse_layout(a.layout));
    if (raw.frames.empty()) throw CliError{2, "segment: no frames in " + a.data};
    const Sequence frames = preprocess_sequence(raw, model.image_size);

    const std::size_t n = frames.size();
    std::vector<Mask> masks(n);
    std::vector<InversionResult> inversions(n);
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::string failure;
    std::mutex failure_mutex;

    auto worker = [&](bool serial_kernels) {
        std::optional<IntraOpSerialGuard> guard;
        if (serial_kernels) guard.emplace();
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n || failed.load()) break;
            try {
                InversionConfig icfg = a.icfg;
                icfg.seed = a.icfg.seed + i; // per-frame stream, schedule independent
                const Tensor x = frame_to_tensor(frames.frames[i]);
                auto [mask, inv] = segment_frame(model, x, icfg, scfg);
                masks[i] = std::move(mask);
                inversions[i] = std::move(inv);
                std::fprintf(stderr, "frame %s best_loss=%.3f\n", frames.names[i].c_str(),
                             inversions[i].best_loss);
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                failed.store(true);
                failure = e.what();
            }
        }
    };

    if (a.jobs == 1) {
        worker(false);
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < a.jobs; ++t) pool.emplace_back(worker, true);
        for (auto& t : pool) t.join();
    }
    if (failed.load()) throw CliError{2, "segment: " + failure};

    WriteLedger ledger;
    try {
        fs::create_directories(a.out);
        if (!a.dump_backgrounds.empty()) fs::create_directories(a.dump_backgrounds);
        if (!a.dump_trajectories.empty()) fs::create_directories(a.dump_trajectories);
        std::string csv = "frame,best_loss\n";
        for (std::size_t i = 0; i < n; ++i) {
            const std::string mask_path = (fs::path(a.out) / frames.names[i]).string();
            write_mask_pgm(mask_path, masks[i]);
            ledger.note(mask_path);
            csv += frames.names[i] + "," + std::to_string(inversions[i].best_loss) + "\n";
            if (!a.dump_backgrounds.empty()) {
                const std::string bg_path =
                    (fs::path(a.dump_backgrounds) / frames.names[i]).string();
                write_pgm(bg_path, tensor_to_image(inversions[i].background));
                ledger.note(bg_path);
            }
            if (!a.dump_trajectories.empty()) {
                const std::string tr_path =
                    (fs::path(a.dump_trajectories) / (frames.names[i] + ".csv")).string();
                write_text_file(tr_path, trajectory_csv(inversions[i].trajectory));
                ledger.note(tr_path);
            }
        }
        write_text_file(a.losses_csv, csv);
        ledger.note(a.losses_csv);
    } catch (...) {
        ledger.dump_on_error();
        throw;
    }
    std::cout << "segmented " << n << " frames into " << a.out << "\n";
    return 0;
}

// ----------------------------------------------------------------- eval ---

struct EvalArgs {
    std::string pred, gt, out = "metrics.csv", sequence, layout = "flat", config;
};

int run_eval(const EvalArgs& a0, const ConfigLayer& layer) {
    EvalArgs a = a0;
    layer.apply_str("pred", a.pred);
    layer.apply_str("gt", a.gt);
    layer.apply_str("out", a.out);
    layer.apply_str("sequence", a.sequence);
    layer.apply_str("layout", a.layout);
    if (a.pred.empty() || a.gt.empty()) throw CliError{2, "eval: --pred and --gt are required"};
    if (!fs::is_directory(a.pred)) throw CliError{2, "eval: not a directory: " + a.pred};
    if (!fs::is_directory(a.gt)) throw CliError{2, "eval: not a directory: " + a.gt};
    const SequenceLayout layout = parse_layout(a.layout);
    if (a.sequence.empty()) a.sequence = fs::path(a.pred).filename().string();

    auto list_images = [](const std::string& dir) {
        std::vector<std::string> names;
        for (const auto& e : fs::directory_iterator(dir))
            if (e.is_regular_file() && is_image_file(e.path()))
                names.push_back(e.path().filename().string());
        std::sort(names.begin(), names.end());
        return names;
    };

    // gt filename -> pred filename it must match
    std::vector<std::pair<std::string, std::string>> pairs;
    constexpr const char* kGtPrefix = "hand_segmented_";
    for (const auto& name : list_images(a.gt)) {
        if (layout == SequenceLayout::WallflowerStyle) {
            if (name.rfind(kGtPrefix, 0) == 0)
                pairs.emplace_back(name, name.substr(std::string(kGtPrefix).size()));
        } else {
            pairs.emplace_back(name, name);
        }
    }
    if (pairs.empty()) throw CliError{2, "eval: no ground-truth masks in " + a.gt};

    const auto pred_names = list_images(a.pred);
    const std::set<std::string> pred_set(pred_names.begin(), pred_names.end());
    std::vector<std::string> unmatched;
    for (const auto& [gt_name, pred_name] : pairs)
        if (!pred_set.contains(pred_name)) unmatched.push_back(pred_name);
    if (layout == SequenceLayout::FlatFrames) {
        std::set<std::string> gt_set;
        for (const auto& [gt_name, pred_name] : pairs) gt_set.insert(gt_name);
        for (const auto& name : pred_names)
            if (!gt_set.contains(name)) unmatched.push_back(name);
    }
    if (!unmatched.empty()) {
        std::cerr << "eval: unmatched filenames:\n";
        for (const auto& u : unmatched) std::cerr << "  " << u << "\n";
        return 2;
    }

    std::vector<MetricRow> rows;
    std::vector<MetricReport> reports;
    for (const auto& [gt_name, pred_name] : pairs) {
        const Mask gt_mask = image_to_mask(read_image((fs::path(a.gt) / gt_name).string()));
        const Mask pred_mask = image_to_mask(read_image((fs::path(a.pred) / pred_name).string()));
        const MetricReport r = compute_metrics(confusion(pred_mask, gt_mask));
        rows.push_back({a.sequence, pred_name, r});
        reports.push_back(r);
    }

    WriteLedger ledger;
    try {
        write_text_file(a.out, metrics_csv(rows));
        ledger.note(a.out);
    } catch (...) {
        ledger.dump_on_error();
        throw;
    }
    const MetricReport m = aggregate(reports);
    const MetricReport p = aggregate_pooled(reports);
    std::printf("frames evaluated: %zu\n", reports.size());
    std::printf("aggregate-mean   A=%.4f Pre=%.4f Re=%.4f Sp=%.4f F=%.4f\n", m.accuracy,
                m.precision, m.recall, m.specificity, m.f_measure);
    std::printf("aggregate-pooled A=%.4f Pre=%.4f Re=%.4f Sp=%.4f F=%.4f\n", p.accuracy,
                p.precision, p.recall, p.specificity, p.f_measure);
    return 0;
}

// ---------------------------------------------------------------- synth ---

struct SynthArgs {
    std::string out = "synth", config;
    SynthConfig cfg;
};

int run_synth(const SynthArgs& a0, const ConfigLayer& layer) {
    SynthArgs a = a0;
    layer.apply_str("out", a.out);
    layer.apply_int("n-background", a.cfg.n_background);
    layer.apply_int("n-test", a.cfg.n_test);
    layer.apply_int("size", a.cfg.size);
    layer.apply_float("wave-amplitude", a.cfg.wave_amplitude);
    layer.apply_float("wave-period-px", a.cfg.wave_period_px);
    layer.apply_float("wave-period-frames", a.cfg.wave_period_frames);
    layer.apply_float("illum-ramp", a.cfg.illum_ramp);
    layer.apply_float("noise-sigma", a.cfg.noise_sigma);
    layer.apply_int("object-size", a.cfg.object_size_px);
    layer.apply_float("object-contrast", a.cfg.object_contrast);
    layer.apply_u64("seed", a.cfg.seed);

    const auto [train_seq, test_seq] = synth_generate(a.cfg);

    WriteLedger ledger;
    try {
        const fs::path root(a.out);
        fs::create_directories(root / "train");
        fs::create_directories(root / "test" / "gt");
        for (std::size_t i = 0; i < train_seq.size(); ++i) {
            const std::string p = (root / "train" / train_seq.names[i]).string();
            write_pgm(p, frame_to_image(train_seq.frames[i]));
            ledger.note(p);
        }
        for (std::size_t i = 0; i < test_seq.size(); ++i) {
            const std::string p = (root / "test" / test_seq.names[i]).string();
            write_pgm(p, frame_to_image(test_seq.frames[i]));
            ledger.note(p);
            const std::string g = (root / "test" / "gt" / test_seq.names[i]).string();
            write_mask_pgm(g, *test_seq.gt[i]);
            ledger.note(g);
        }
    } catch (...) {
        ledger.dump_on_error();
        throw;
    }
    std::cout << "wrote " << train_seq.size() << " train and " << test_seq.size()
              << " test frames under " << a.out << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    tune_allocator();
    CLI::App app{"GAN background modeling, latent-inversion background recovery, "
                 "foreground segmentation and evaluation"};
    app.require_subcommand(1);

    TrainArgs train_args;
    SegmentArgs seg_args;
    EvalArgs eval_args;
    SynthArgs synth_args;
    ConfigLayer train_layer, seg_layer, eval_layer, synth_layer;

    CLI::App* t = app.add_subcommand("train", "Train the background GAN on a frame directory");
    train_layer.options["data"] =
        t->add_option("--data", train_args.data, "Directory of background-only frames");
    train_layer.options["out"] =
        t->add_option("--out", train_args.out, "Checkpoint output path")->capture_default_str();
    train_layer.options["loss-csv"] =
        t->add_option("--loss-csv", train_args.loss_csv, "Per-step loss CSV path")
            ->capture_default_str();
    train_layer.options["steps"] =
        t->add_option("--steps", train_args.cfg.steps, "Training steps")->capture_default_str();
    train_layer.options["batch-size"] =
        t->add_option("--batch-size", train_args.cfg.batch_size, "Batch size")
            ->capture_default_str();
    train_layer.options["latent-dim"] =
        t->add_option("--latent-dim", train_args.cfg.latent_dim, "Latent dimension")
            ->capture_default_str();
    train_layer.options["lr"] =
        t->add_option("--lr", train_args.cfg.lr, "Adam learning rate")->capture_default_str();
    train_layer.options["beta1"] =
        t->add_option("--beta1", train_args.cfg.adam_beta1, "Adam beta1")->capture_default_str();
    train_layer.options["beta2"] =
        t->add_option("--beta2", train_args.cfg.adam_beta2, "Adam beta2")->capture_default_str();
    train_layer.options["size"] =
        t->add_option("--size", train_args.size, "Training image size (pixels per side)")
            ->capture_default_str();
    train_layer.options["seed"] =
        t->add_option("--seed", train_args.cfg.seed, "RNG seed")->capture_default_str();
    t->add_option("--config", train_args.config, "key=value config file");

    CLI::App* s = app.add_subcommand("segment", "Segment foreground masks from a test directory");
    seg_layer.options["model"] = s->add_option("--model", seg_args.model, "Checkpoint path");
    seg_layer.options["data"] = s->add_option("--data", seg_args.data, "Test frame directory");
    seg_layer.options["out"] =
        s->add_option("--out", seg_args.out, "Mask output directory")->capture_default_str();
    seg_layer.options["steps"] =
        s->add_option("--steps", seg_args.icfg.steps, "Back-propagation steps per frame")
            ->capture_default_str();
    seg_layer.options["lr"] =
        s->add_option("--lr", seg_args.icfg.lr, "Inversion learning rate")->capture_default_str();
    seg_layer.options["optimizer"] =
        s->add_flag("--plain-gradient", seg_args.optimizer_is_plain,
                    "Use plain gradient descent instead of Adam");
    seg_layer.options["restarts"] =
        s->add_option("--restarts", seg_args.icfg.restarts, "Random restarts per frame")
            ->capture_default_str();
    seg_layer.options["seed"] =
        s->add_option("--seed", seg_args.icfg.seed, "Base RNG seed (per-frame offset added)")
            ->capture_default_str();
    seg_layer.options["threshold-mode"] =
        s->add_option("--threshold-mode", seg_args.threshold_mode, "otsu|fixed")
            ->capture_default_str();
    seg_layer.options["fixed-tau"] =
        s->add_option("--fixed-tau", seg_args.fixed_tau, "Fixed threshold (fixed mode)")
            ->capture_default_str();
    seg_layer.options["median-radius"] =
        s->add_option("--median-radius", seg_args.median_radius, "Median filter radius")
            ->capture_default_str();
    seg_layer.options["losses-csv"] =
        s->add_option("--losses-csv", seg_args.losses_csv, "Per-frame inversion loss CSV")
            ->capture_default_str();
    seg_layer.options["dump-backgrounds"] = s->add_option(
        "--dump-backgrounds", seg_args.dump_backgrounds, "Also write recovered backgrounds here");
    seg_layer.options["dump-trajectories"] = s->add_option(
        "--dump-trajectories", seg_args.dump_trajectories, "Write per-frame step,loss CSVs here");
    seg_layer.options["layout"] =
        s->add_option("--layout", seg_args.layout, "Input layout: flat|wallflower")
            ->capture_default_str();
    seg_layer.options["jobs"] =
        s->add_option("--jobs", seg_args.jobs, "Parallel frame workers (1 = deterministic order)")
            ->capture_default_str();
    s->add_option("--config", seg_args.config, "key=value config file");

    CLI::App* e = app.add_subcommand("eval", "Score predicted masks against ground truth");
    eval_layer.options["pred"] = e->add_option("--pred", eval_args.pred, "Predicted mask directory");
    eval_layer.options["gt"] = e->add_option("--gt", eval_args.gt, "Ground-truth mask directory");
    eval_layer.options["out"] =
        e->add_option("--out", eval_args.out, "Metrics CSV path")->capture_default_str();
    eval_layer.options["sequence"] =
        e->add_option("--sequence", eval_args.sequence, "Sequence name for the CSV");
    eval_layer.options["layout"] =
        e->add_option("--layout", eval_args.layout, "Ground-truth layout: flat|wallflower")
            ->capture_default_str();
    e->add_option("--config", eval_args.config, "key=value config file");

    CLI::App* y = app.add_subcommand("synth", "Generate the synthetic benchmark dataset");
    synth_layer.options["out"] =
        y->add_option("--out", synth_args.out, "Output root directory")->capture_default_str();
    synth_layer.options["n-background"] =
        y->add_option("--n-background", synth_args.cfg.n_background, "Training frames")
            ->capture_default_str();
    synth_layer.options["n-test"] =
        y->add_option("--n-test", synth_args.cfg.n_test, "Test frames")->capture_default_str();
    synth_layer.options["size"] =
        y->add_option("--size", synth_args.cfg.size, "Frame size (pixels per side)")
            ->capture_default_str();
    synth_layer.options["wave-amplitude"] =
        y->add_option("--wave-amplitude", synth_args.cfg.wave_amplitude, "Wave amplitude")
            ->capture_default_str();
    synth_layer.options["wave-period-px"] =
        y->add_option("--wave-period-px", synth_args.cfg.wave_period_px, "Wave period (pixels)")
            ->capture_default_str();
    synth_layer.options["wave-period-frames"] =
        y->add_option("--wave-period-frames", synth_args.cfg.wave_period_frames,
                      "Wave period (frames)")
            ->capture_default_str();
    synth_layer.options["illum-ramp"] =
        y->add_option("--illum-ramp", synth_args.cfg.illum_ramp,
                      "Illumination ramp (gray levels per frame)")
            ->capture_default_str();
    synth_layer.options["noise-sigma"] =
        y->add_option("--noise-sigma", synth_args.cfg.noise_sigma, "Gaussian noise sigma")
            ->capture_default_str();
    synth_layer.options["object-size"] =
        y->add_option("--object-size", synth_args.cfg.object_size_px, "Composited square size")
            ->capture_default_str();
    synth_layer.options["object-contrast"] =
        y->add_option("--object-contrast", synth_args.cfg.object_contrast,
                      "Object contrast in [0,1]")
            ->capture_default_str();
    synth_layer.options["seed"] =
        y->add_option("--seed", synth_args.cfg.seed, "RNG seed")->capture_default_str();
    y->add_option("--config", synth_args.config, "key=value config file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& help) {
        return app.exit(help);
    } catch (const CLI::ParseError& err) {
        app.exit(err);
        return 2;
    }

    try {
        if (t->parsed()) {
            if (!train_args.config.empty()) train_layer.load(train_args.config);
            return run_train(train_args, train_layer);
        }
        if (s->parsed()) {
            if (!seg_args.config.empty()) seg_layer.load(seg_args.config);
            return run_segment(seg_args, seg_layer);
        }
        if (e->parsed()) {
            if (!eval_args.config.empty()) eval_layer.load(eval_args.config);
            return run_eval(eval_args, eval_layer);
        }
        if (y->parsed()) {
            if (!synth_args.config.empty()) synth_layer.load(synth_args.config);
            return run_synth(synth_args, synth_layer);
        }
    } catch (const CliError& e) {
        std::cerr << "error: " << e.message << "\n";
        return e.code;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
