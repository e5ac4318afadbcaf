#include <CLI11.hpp>
#include <json.hpp>

#include <fcntl.h>
#include <unistd.h>

#include <atomic>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "fsplat/checkpoint.hpp"
#include "fsplat/dataset.hpp"
#include "fsplat/deformation.hpp"
#include "fsplat/errors.hpp"
#include "fsplat/fft.hpp"
#include "fsplat/flow_io.hpp"
#include "fsplat/gradcheck.hpp"
#include "fsplat/metrics.hpp"
#include "fsplat/ply_io.hpp"
#include "fsplat/png_io.hpp"
#include "fsplat/synthetic.hpp"
#include "fsplat/thf.hpp"
#include "fsplat/trainer.hpp"

namespace fs = std::filesystem;
using namespace fsplat;

namespace {

std::atomic<bool> g_stop{false};

void handle_sigint(int) { g_stop.store(true); }

// One lock per output directory; concurrent runs against the same directory
// would corrupt checkpoints and logs.
class DirLock {
  public:
    explicit DirLock(const fs::path& dir) : path_(dir / ".lock") {
        int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd < 0) {
            throw DataError("output directory " + dir.string() +
                            " is locked by another run (remove " + path_.string() +
                            " if that run is gone)");
        }
        ::close(fd);
        owned_ = true;
    }
    ~DirLock() {
        if (owned_) {
            std::error_code ec;
            fs::remove(path_, ec);
        }
    }
    DirLock(const DirLock&) = delete;
    DirLock& operator=(const DirLock&) = delete;

  private:
    fs::path path_;
    bool owned_ = false;
};

std::string indexed_name(const char* prefix, int index, const char* ext = ".png") {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s%04d%s", prefix, index, ext);
    return buf;
}

GaussianCloud cloud_at_time(const TrainerState& state, double t, int threads) {
    if (state.stage >= 2) return deform_cloud(state.cloud, t, state.field, nullptr, threads);
    return state.cloud;
}

// Per-channel log amplitude of the centered spectrum, normalized to [0, 1]
// for display.
Image spectrum_panel(const Image& image) {
    Spectrum spec = fft2(image);
    Image panel(image.height(), image.width(), image.channels());
    double max_v = 0.0;
    for (size_t i = 0; i < panel.size(); ++i) {
        panel.raw()[i] = std::log1p(spec.amplitude.raw()[i]);
        max_v = std::max(max_v, panel.raw()[i]);
    }
    if (max_v > 0) {
        for (size_t i = 0; i < panel.size(); ++i) panel.raw()[i] /= max_v;
    }
    return panel;
}

struct TrainArgs {
    std::string data_dir;
    std::string out_dir;
    std::string config_path;
    std::vector<std::string> sets;
    std::vector<std::pair<std::string, std::string>> flag_overrides;
    bool force = false;
    bool resume = false;
    int log_every = 100;
};

int run_train(const TrainArgs& args) {
    Dataset dataset = load_dataset(args.data_dir);
    TrainConfig config = args.config_path.empty() ? TrainConfig{}
                                                  : load_train_config(args.config_path);
    for (const std::string& kv : args.sets) {
        size_t eq = kv.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw ConfigError("--set expects key=value, got '" + kv + "'");
        }
        apply_config_override(config, kv.substr(0, eq), kv.substr(eq + 1));
    }
    for (const auto& [key, value] : args.flag_overrides) {
        apply_config_override(config, key, value);
    }
    validate_train_config(config);

    fs::create_directories(args.out_dir);
    DirLock lock(args.out_dir);
    const fs::path out(args.out_dir);
    const std::string checkpoint_path = (out / "checkpoint.fsc").string();

    std::unique_ptr<Trainer> trainer;
    if (args.resume) {
        if (!fs::exists(checkpoint_path)) {
            throw DataError("--resume given but no checkpoint at " + checkpoint_path);
        }
        TrainerState state = load_checkpoint(checkpoint_path, train_config_hash(config));
        trainer = std::make_unique<Trainer>(dataset, config, std::move(state));
        std::cout << "resuming from iteration " << trainer->iteration() << "\n";
    } else {
        if (fs::exists(checkpoint_path) && !args.force) {
            throw DataError("checkpoint already exists at " + checkpoint_path +
                            " (pass --force to overwrite or --resume to continue)");
        }
        trainer = std::make_unique<Trainer>(dataset, config);
    }
    save_train_config((out / "config.used.json").string(), config);

    std::ofstream log((out / "train_log.jsonl").string(),
                      args.resume ? std::ios::app : std::ios::trunc);
    if (!log) throw DataError("cannot open train log in " + args.out_dir);

    std::signal(SIGINT, handle_sigint);
    const int64_t total = trainer->total_iterations();
    trainer->run(checkpoint_path,
                 [&](const LossReport& report) {
                     log << loss_report_json(report) << "\n";
                     if (report.iteration % args.log_every == 0 || report.iteration == 1 ||
                         report.iteration == total) {
                         std::printf("iter %6d/%lld [%s] total %.6f l1 %.6f depth %.6f "
                                     "shf %.6f thf %.6f tv %.6f\n",
                                     report.iteration, static_cast<long long>(total),
                                     report.stage.c_str(), report.total, report.l1, report.depth,
                                     report.shf, report.thf, report.tv);
                         std::fflush(stdout);
                     }
                 },
                 &g_stop);
    log.close();

    if (!trainer->finished()) {
        std::cout << "interrupted at iteration " << trainer->iteration()
                  << ", partial checkpoint written to " << checkpoint_path << "\n";
        return 0;
    }

    // Final full-sequence metrics, logged for downstream consistency checks.
    double psnr_sum = 0.0, ssim_sum = 0.0;
    for (int i = 0; i < dataset.frame_count(); ++i) {
        RenderOutput outp = trainer->render_frame(i);
        psnr_sum += psnr(outp.image, dataset.frames[i].image);
        ssim_sum += ssim(outp.image, dataset.frames[i].image);
    }
    double mean_psnr = psnr_sum / dataset.frame_count();
    double mean_ssim = ssim_sum / dataset.frame_count();

    nlohmann::json summary;
    summary["iterations"] = trainer->iteration();
    summary["gaussians"] = trainer->state().cloud.size();
    summary["final_psnr_mean"] = mean_psnr;
    summary["final_ssim_mean"] = mean_ssim;
    std::ofstream sf((out / "summary.json").string());
    sf << summary.dump(2) << "\n";

    write_ply((out / "cloud.ply").string(), trainer->state().cloud);
    std::printf("done: %lld iterations, %zu gaussians, mean psnr %.4f dB, mean ssim %.4f\n",
                static_cast<long long>(trainer->iteration()), trainer->state().cloud.size(),
                mean_psnr, mean_ssim);
    return 0;
}

int run_render(const std::string& checkpoint_path, const std::string& out_dir,
               const std::vector<double>& times, const std::vector<int>& frames, bool all_frames,
               int threads) {
    TrainerState state = load_checkpoint(checkpoint_path);
    fs::create_directories(out_dir);
    const fs::path out(out_dir);
    RenderOptions options;
    options.threads = threads;

    std::vector<std::pair<std::string, double>> jobs;
    for (int i : frames) {
        if (i < 0 || i >= state.frame_count) {
            throw ConfigError("--frame " + std::to_string(i) + " outside [0, " +
                              std::to_string(state.frame_count) + ")");
        }
        jobs.emplace_back(indexed_name("frame_", i), static_cast<double>(i) / state.frame_count);
    }
    if (all_frames) {
        for (int i = 0; i < state.frame_count; ++i) {
            jobs.emplace_back(indexed_name("frame_", i),
                              static_cast<double>(i) / state.frame_count);
        }
    }
    for (double t : times) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "time_%.6f.png", t);
        jobs.emplace_back(buf, t);
    }
    if (jobs.empty()) throw ConfigError("render needs --frame, --time, or --all");

    for (const auto& [name, t] : jobs) {
        GaussianCloud cloud = cloud_at_time(state, t, threads);
        RenderOutput rendered = render(cloud, state.camera, options, nullptr);
        write_png_rgb((out / name).string(), rendered.image);
    }
    std::cout << "rendered " << jobs.size() << " images to " << out_dir << "\n";
    return 0;
}

int run_eval(const std::string& checkpoint_path, const std::string& data_dir,
             const std::string& out_dir, bool spectra, bool flow, int threads) {
    TrainerState state = load_checkpoint(checkpoint_path);
    Dataset dataset = load_dataset(data_dir);
    if (dataset.camera.width != state.camera.width ||
        dataset.camera.height != state.camera.height) {
        throw DataError("dataset frames are " + std::to_string(dataset.camera.width) + "x" +
                        std::to_string(dataset.camera.height) + " but the checkpoint was trained " +
                        "at " + std::to_string(state.camera.width) + "x" +
                        std::to_string(state.camera.height));
    }
    fs::create_directories(out_dir);
    const fs::path out(out_dir);
    RenderOptions options;
    options.threads = threads;

    std::vector<Image> renders;
    nlohmann::json per_frame = nlohmann::json::array();
    double psnr_sum = 0.0, ssim_sum = 0.0;
    std::printf("%-8s %10s %8s\n", "frame", "psnr", "ssim");
    for (int i = 0; i < dataset.frame_count(); ++i) {
        const FrameRecord& rec = dataset.frames[i];
        GaussianCloud cloud = cloud_at_time(state, rec.time, threads);
        RenderOutput rendered = render(cloud, state.camera, options, nullptr);
        double p = psnr(rendered.image, rec.image);
        double s = ssim(rendered.image, rec.image);
        psnr_sum += p;
        ssim_sum += s;
        per_frame.push_back({{"frame", i}, {"psnr", p}, {"ssim", s}});
        std::printf("%-8d %10.4f %8.4f\n", i, p, s);
        write_png_rgb((out / indexed_name("render_", i)).string(), rendered.image);
        if (spectra) {
            write_png_rgb((out / indexed_name("spectrum_gt_", i)).string(),
                          spectrum_panel(rec.image));
            write_png_rgb((out / indexed_name("spectrum_render_", i)).string(),
                          spectrum_panel(rendered.image));
        }
        if (flow) renders.push_back(rendered.image);
    }
    double mean_psnr = psnr_sum / dataset.frame_count();
    double mean_ssim = ssim_sum / dataset.frame_count();
    std::printf("%-8s %10.4f %8.4f\n", "mean", mean_psnr, mean_ssim);

    if (flow) {
        LkFlowPredictor lk;
        for (int i = 1; i < dataset.frame_count(); ++i) {
            FlowField fr = lk.predict(renders[i], renders[i - 1], i).flow;
            FlowField fg = lk.predict(dataset.frames[i].image, dataset.frames[i - 1].image,
                                      i).flow;
            double max_mag = 0.0;
            for (size_t k = 0; k < fr.u.size(); ++k) {
                max_mag = std::max(max_mag, std::hypot(fr.u.raw()[k], fr.v.raw()[k]));
                max_mag = std::max(max_mag, std::hypot(fg.u.raw()[k], fg.v.raw()[k]));
            }
            write_png_rgb((out / indexed_name("flow_render_", i)).string(),
                          flow_to_rgb(fr, max_mag));
            write_png_rgb((out / indexed_name("flow_gt_", i)).string(), flow_to_rgb(fg, max_mag));
        }
    }

    nlohmann::json metrics;
    metrics["frames"] = per_frame;
    metrics["mean_psnr"] = mean_psnr;
    metrics["mean_ssim"] = mean_ssim;
    std::ofstream mf((out / "metrics.json").string());
    mf << metrics.dump(2) << "\n";
    return 0;
}

int run_gradcheck_cmd(const GradCheckOptions& options) {
    std::vector<GradCheckEntry> entries = run_gradcheck(options);
    std::string first_fail;
    for (const GradCheckEntry& e : entries) {
        std::printf("[%s] %-34s checked=%4d max_abs=%.3e max_rel=%.3e\n",
                    e.pass ? "PASS" : "FAIL", e.full_name().c_str(), e.checked, e.max_abs_diff,
                    e.max_rel_err);
        if (!e.pass && first_fail.empty()) first_fail = e.full_name();
    }
    if (!first_fail.empty()) {
        throw NumericError("gradient check failed for group " + first_fail);
    }
    std::printf("all %zu gradient groups pass\n", entries.size());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Deformable gaussian splatting with frequency-domain supervision"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
    std::string synth_name, synth_out = "data";
    uint64_t synth_seed = 7;
    int synth_frames = 0, synth_size = 64;
    synth->add_option("name", synth_name,
                      "Scene: static_texture | translating_blob | pulsating_sheet")
        ->required();
    synth->add_option("--seed", synth_seed, "Generator seed");
    synth->add_option("--frames", synth_frames, "Frame count (0 = scene default)");
    synth->add_option("--size", synth_size, "Image side length in pixels");
    synth->add_option("-o,--out", synth_out, "Output dataset directory");

    // train
    auto* train = app.add_subcommand("train", "Fit a model to a dataset");
    TrainArgs targs;
    train->add_option("-d,--data", targs.data_dir, "Dataset directory")->required();
    train->add_option("-o,--out", targs.out_dir, "Output directory")->required();
    train->add_option("-c,--config", targs.config_path, "Training config JSON");
    train->add_option("--set", targs.sets, "Override any config field, key=value (repeatable)");
    train->add_flag("--force", targs.force, "Overwrite an existing checkpoint");
    train->add_flag("--resume", targs.resume, "Continue from the existing checkpoint");
    train->add_option("--log-every", targs.log_every, "Stdout progress period");
    // Dedicated flags for the commonly swept fields; these win over --set.
    std::map<std::string, std::string> flag_values;
    const std::pair<const char*, const char*> dedicated[] = {
        {"--static-iters", "static_iters"},   {"--deform-iters", "deform_iters"},
        {"--lambda-d", "lambda_d"},           {"--lambda-tv", "lambda_tv"},
        {"--lambda-shf", "lambda_shf"},       {"--lambda-thf", "lambda_thf"},
        {"--flow-predictor", "flow_predictor"}, {"--seed", "seed"},
        {"--threads", "threads"},             {"--checkpoint-interval", "checkpoint_interval"},
        {"--sh-degree", "sh_degree"},
    };
    for (const auto& [flag, key] : dedicated) {
        train->add_option_function<std::string>(
            flag, [&flag_values, key = std::string(key)](const std::string& v) {
                flag_values[key] = v;
            },
            std::string("Set config field ") + key);
    }

    // render
    auto* render_cmd = app.add_subcommand("render", "Render frames from a checkpoint");
    std::string render_ckpt, render_out = "renders";
    std::vector<double> render_times;
    std::vector<int> render_frames;
    bool render_all = false;
    int render_threads = 1;
    render_cmd->add_option("--checkpoint", render_ckpt, "Checkpoint file")->required();
    render_cmd->add_option("-o,--out", render_out, "Output directory");
    render_cmd->add_option("--time", render_times, "Normalized time in [0,1] (repeatable)");
    render_cmd->add_option("--frame", render_frames, "Training frame index (repeatable)");
    render_cmd->add_flag("--all", render_all, "Render every training frame");
    render_cmd->add_option("--threads", render_threads, "Render worker threads");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "Score a checkpoint against a dataset");
    std::string eval_ckpt, eval_data, eval_out = "eval";
    bool eval_spectra = false, eval_flow = false;
    int eval_threads = 1;
    eval_cmd->add_option("--checkpoint", eval_ckpt, "Checkpoint file")->required();
    eval_cmd->add_option("-d,--data", eval_data, "Dataset directory")->required();
    eval_cmd->add_option("-o,--out", eval_out, "Output directory");
    eval_cmd->add_flag("--spectra", eval_spectra, "Write log-amplitude spectrum panels");
    eval_cmd->add_flag("--flow", eval_flow, "Write flow visualizations for adjacent pairs");
    eval_cmd->add_option("--threads", eval_threads, "Render worker threads");

    // gradcheck
    auto* gc = app.add_subcommand("gradcheck", "Verify analytic gradients by central differences");
    GradCheckOptions gc_options;
    gc->add_option("--module", gc_options.module,
                   "Only one module: rasterizer | deformation | shf | thf | objective");
    gc->add_option("--inject-sign-error", gc_options.inject_sign_error,
                   "Flip analytic signs for groups containing this substring (must fail)");
    gc->add_option("--seed", gc_options.seed, "Scene sampling seed");
    gc->add_option("--step", gc_options.step, "Central difference step");

    try {
        app.parse(argc, argv);
        if (*synth) {
            SyntheticScene scene = make_synthetic_scene(synth_name, synth_seed, synth_frames,
                                                        synth_size);
            fs::create_directories(synth_out);
            save_dataset(synth_out, scene.dataset);
            std::cout << "wrote " << scene.dataset.frame_count() << " frames to " << synth_out
                      << "\n";
            return 0;
        }
        if (*train) {
            for (const auto& [key, value] : flag_values) {
                targs.flag_overrides.emplace_back(key, value);
            }
            return run_train(targs);
        }
        if (*render_cmd) {
            return run_render(render_ckpt, render_out, render_times, render_frames, render_all,
                              render_threads);
        }
        if (*eval_cmd) {
            return run_eval(eval_ckpt, eval_data, eval_out, eval_spectra, eval_flow, eval_threads);
        }
        if (*gc) return run_gradcheck_cmd(gc_options);
        return 0;
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        std::cerr << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
}
