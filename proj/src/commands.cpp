#include "inr4d/commands.hpp"

#include "inr4d/checkpoint.hpp"
#include "inr4d/error.hpp"
#include "inr4d/metrics.hpp"
#include "inr4d/nifti.hpp"
#include "inr4d/series.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace inr4d {

namespace fs = std::filesystem;

namespace {

std::string frame_name(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "t%03zu.nii.gz", i);
    return buf;
}

void require_file(const fs::path& p, const std::string& what) {
    require(fs::exists(p), what + ": missing " + p.string());
}

fs::path input_manifest(const RunConfig& cfg) {
    return cfg.manifest ? *cfg.manifest : layout::phantom_dir(cfg) / "noisy.tsv";
}

struct LoadedSeries {
    Volume4D normalized;
    std::optional<LabelVolume> mask;
};

LoadedSeries load_training_series(const RunConfig& cfg) {
    const fs::path manifest = input_manifest(cfg);
    require_file(manifest, "input manifest");
    if (cfg.mask) require_file(*cfg.mask, "mask");
    LoadedSeries out{normalize_intensity(load_series(read_manifest(manifest))), std::nullopt};
    if (cfg.mask) {
        out.mask = read_labels(*cfg.mask);
        require(out.mask->dims == out.normalized.dims(), "mask dims do not match the series");
    }
    return out;
}

TimeSplit make_split(const RunConfig& cfg, const std::vector<double>& times) {
    return cfg.midpoints.empty() ? split_timepoints(times) : split_timepoints(times, cfg.midpoints);
}

std::string num(double v) {
    std::ostringstream o;
    o << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
    return o.str();
}

std::ofstream open_out(const fs::path& p) {
    fs::create_directories(p.parent_path());
    std::ofstream out(p);
    require(out.good(), "I/O failure: cannot write " + p.string());
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    return out;
}

fs::path rel(const RunConfig& cfg, const fs::path& p) { return p.lexically_relative(cfg.run_dir); }

void record_outputs(const RunConfig& cfg, const std::string& command, const std::vector<fs::path>& produced) {
    const fs::path file = layout::outputs_file(cfg);
    std::vector<std::string> kept;
    if (std::ifstream in(file); in.good()) {
        std::string line;
        while (std::getline(in, line))
            if (line.rfind(command + "\t", 0) != 0 && !line.empty()) kept.push_back(line);
    }
    fs::create_directories(cfg.run_dir);
    std::ofstream out(file, std::ios::trunc);
    require(out.good(), "I/O failure: cannot write " + file.string());
    for (const auto& l : kept) out << l << '\n';
    for (const auto& p : produced) out << command << '\t' << p.string() << '\n';
}

TrainConfig train_config(const RunConfig& cfg, const LoadedSeries& s) {
    TrainConfig t = cfg.train;
    t.mask = s.mask;
    return t;
}

} // namespace

CommandResult cmd_phantom(const RunConfig& cfg) {
    cfg.phantom.validate();
    const PhantomSeries ph = generate(cfg.phantom);
    const fs::path dir = layout::phantom_dir(cfg);
    CommandResult r;
    std::vector<ManifestEntry> clean, noisy, labels;
    for (std::size_t i = 0; i < ph.times.size(); ++i) {
        const fs::path c = dir / "clean" / frame_name(i);
        const fs::path n = dir / "noisy" / frame_name(i);
        const fs::path l = dir / "labels" / frame_name(i);
        write_nifti(ph.clean[i], c);
        write_nifti(ph.noisy[i], n);
        write_labels(ph.labels[i], l);
        clean.push_back({c, ph.times[i]});
        noisy.push_back({n, ph.times[i]});
        labels.push_back({l, ph.times[i]});
        for (const auto& p : {c, n, l}) r.produced.push_back(rel(cfg, p));
    }
    write_manifest(dir / "clean.tsv", clean);
    write_manifest(dir / "noisy.tsv", noisy);
    write_manifest(dir / "labels.tsv", labels);
    for (const char* m : {"clean.tsv", "noisy.tsv", "labels.tsv"}) r.produced.push_back(rel(cfg, dir / m));
    r.summary = "phantom: " + std::to_string(ph.times.size()) + " time points written to " + dir.string();
    return r;
}

CommandResult cmd_pretrain(const RunConfig& cfg) {
    cfg.validate();
    const LoadedSeries s = load_training_series(cfg);
    const TrainConfig tc = train_config(cfg, s);
    const TimeSplit split = make_split(cfg, s.normalized.times);
    const fs::path dir = layout::pretrain_dir(cfg);
    CommandResult r;

    {
        auto out = open_out(dir / "split.tsv");
        out << "set\ttimes\n";
        auto row = [&](const char* name, const std::vector<double>& v) {
            out << name << '\t';
            for (std::size_t i = 0; i < v.size(); ++i) out << (i ? "," : "") << v[i];
            out << '\n';
        };
        row("set1", split.times1());
        row("set2", split.times2());
        row("midpoints", split.midpoints);
        r.produced.push_back(rel(cfg, dir / "split.tsv"));
    }

    std::string summary = "pretrain:";
    for (int stream : {1, 2}) {
        const auto& subset = stream == 1 ? split.set1 : split.set2;
        const fs::path log_path = dir / ("loss_model" + std::to_string(stream) + ".tsv");
        auto log = open_out(log_path);
        log << "epoch\tloss\tlr\n";
        const PretrainResult pr = pretrain(s.normalized, subset, tc, stream, [&](int epoch, double loss, double lr) {
            log << epoch << '\t' << loss << '\t' << lr << '\n';
        });
        const fs::path ck = dir / ("model" + std::to_string(stream) + ".ckpt");
        save_checkpoint(pr.model, ck, &pr.optimizer);
        r.produced.push_back(rel(cfg, ck));
        r.produced.push_back(rel(cfg, log_path));
        summary += " model" + std::to_string(stream) + " final loss " +
                   (pr.loss_curve.empty() ? std::string("n/a") : num(pr.loss_curve.back()));
    }
    r.summary = summary;
    return r;
}

CommandResult cmd_refine(const RunConfig& cfg) {
    cfg.validate();
    const fs::path pre = layout::pretrain_dir(cfg);
    for (const char* m : {"model1.ckpt", "model2.ckpt"})
        require(fs::exists(pre / m), "stage order: refine needs pretrain checkpoints (" + (pre / m).string() +
                                         " not found); run pretrain first");
    const LoadedSeries s = load_training_series(cfg);
    const TrainConfig tc = train_config(cfg, s);
    const TimeSplit split = make_split(cfg, s.normalized.times);

    const fs::path dir = layout::refine_dir(cfg);
    auto log = open_out(dir / "history.tsv");
    log << "epoch\tL1\tL2\tL_cross\tL_total\tlr\n";
    RefineResult rr = refine(load_checkpoint(pre / "model1.ckpt"), load_checkpoint(pre / "model2.ckpt"), s.normalized,
                             split, tc, [&](int epoch, const RefineEpoch& e) {
                                 log << epoch << '\t' << e.l1 << '\t' << e.l2 << '\t' << e.l_cross << '\t' << e.l_total
                                     << '\t' << e.lr << '\n';
                             });
    log.close();
    save_checkpoint(rr.model1, dir / "model1.ckpt");
    save_checkpoint(rr.model2, dir / "model2.ckpt");
    {
        auto out = open_out(dir / "summary.tsv");
        out << "best_epoch\t" << rr.history.best_epoch << '\n';
        out << "epochs_run\t" << rr.history.epochs.size() << '\n';
        if (rr.history.best_epoch >= 0) {
            const auto& b = rr.history.epochs[static_cast<std::size_t>(rr.history.best_epoch)];
            out << "best_L_total\t" << b.l_total << '\n' << "best_L_cross\t" << b.l_cross << '\n';
        }
    }
    CommandResult r;
    for (const char* f : {"model1.ckpt", "model2.ckpt", "history.tsv", "summary.tsv"}) r.produced.push_back(rel(cfg, dir / f));
    r.summary = "refine: best epoch " + std::to_string(rr.history.best_epoch) + " of " +
                std::to_string(rr.history.epochs.size());
    return r;
}

CommandResult cmd_infer(const RunConfig& cfg) {
    cfg.validate();
    const fs::path src = cfg.infer_from == "refine" ? layout::refine_dir(cfg) : layout::pretrain_dir(cfg);
    for (const char* m : {"model1.ckpt", "model2.ckpt"})
        require(fs::exists(src / m), "stage order: infer needs " + cfg.infer_from + " checkpoints (" +
                                         (src / m).string() + " not found)");
    std::vector<double> times = cfg.infer_times;
    if (times.empty()) {
        const fs::path manifest = input_manifest(cfg);
        require_file(manifest, "input manifest (needed for default infer_times)");
        for (const auto& e : read_manifest(manifest)) times.push_back(e.time_weeks);
        std::sort(times.begin(), times.end());
    }

    InrModel m1 = load_checkpoint(src / "model1.ckpt");
    InrModel m2 = load_checkpoint(src / "model2.ckpt");
    m1.mode = Mode::Eval;
    m2.mode = Mode::Eval;
    const DomainInfo& d = m1.domain;
    const Dims dims{std::max(1, static_cast<int>(std::lround(d.grid.nx * cfg.infer_scale))),
                    std::max(1, static_cast<int>(std::lround(d.grid.ny * cfg.infer_scale))),
                    std::max(1, static_cast<int>(std::lround(d.grid.nz * cfg.infer_scale)))};
    const Spacing spacing{d.spacing[0] * d.grid.nx / dims.nx, d.spacing[1] * d.grid.ny / dims.ny,
                          d.spacing[2] * d.grid.nz / dims.nz};

    const Volume4D raw = reconstruct_normalized(m1, m2, dims, spacing, times);
    const std::pair<double, double> scale{d.intensity_min, d.intensity_max};
    const fs::path dir = layout::infer_dir(cfg);
    CommandResult r;
    std::vector<ManifestEntry> entries;
    auto summary = open_out(dir / "summary.tsv");
    summary << "time\tmin_normalized\tmax_normalized\n";
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const auto [lo, hi] = std::minmax_element(raw.volumes[i].data.begin(), raw.volumes[i].data.end());
        summary << raw.times[i] << '\t' << *lo << '\t' << *hi << '\n';
        const fs::path p = dir / frame_name(i);
        write_nifti(denormalize(raw.volumes[i], scale), p);
        entries.push_back({p, raw.times[i]});
        r.produced.push_back(rel(cfg, p));
    }
    summary.close();
    write_manifest(dir / "manifest.tsv", entries);
    r.produced.push_back(rel(cfg, dir / "manifest.tsv"));
    r.produced.push_back(rel(cfg, dir / "summary.tsv"));
    r.summary = "infer: " + std::to_string(raw.size()) + " volume(s) of " + std::to_string(dims.nx) + "x" +
                std::to_string(dims.ny) + "x" + std::to_string(dims.nz);
    return r;
}

CommandResult cmd_eval(const RunConfig& cfg) {
    cfg.validate();
    const fs::path input = cfg.eval_input ? *cfg.eval_input : layout::infer_dir(cfg) / "manifest.tsv";
    require_file(input, "eval input manifest");
    if (cfg.eval_reference) require_file(*cfg.eval_reference, "eval reference manifest");
    if (cfg.eval_labels) require_file(*cfg.eval_labels, "eval label manifest");
    if (cfg.eval_fields) require(fs::is_directory(*cfg.eval_fields), "eval fields: not a directory " + cfg.eval_fields->string());

    const Volume4D series = load_series(read_manifest(input));
    const std::size_t n = series.size();

    // Entries of a reference manifest matching every evaluated time, in order.
    auto match = [&](const fs::path& manifest, bool strict) -> std::optional<std::vector<fs::path>> {
        const auto entries = read_manifest(manifest);
        std::vector<fs::path> out;
        for (double t : series.times) {
            auto it = std::find_if(entries.begin(), entries.end(), [&](const auto& e) { return e.time_weeks == t; });
            if (it == entries.end()) {
                require(!strict, "reference " + manifest.string() + " has no entry for time " + num(t));
                return std::nullopt;
            }
            out.push_back(it->path);
        }
        return out;
    };
    std::optional<std::vector<fs::path>> ref_paths, label_paths;
    if (cfg.eval_reference) ref_paths = match(*cfg.eval_reference, true);
    else if (fs::exists(layout::phantom_dir(cfg) / "clean.tsv")) ref_paths = match(layout::phantom_dir(cfg) / "clean.tsv", false);
    if (cfg.eval_labels) label_paths = match(*cfg.eval_labels, true);
    else if (fs::exists(layout::phantom_dir(cfg) / "labels.tsv")) label_paths = match(layout::phantom_dir(cfg) / "labels.tsv", false);

    MetricsReport rep;
    rep.times = series.times;
    rep.psnr_peak = cfg.psnr_peak;
    std::vector<LabelVolume> seg;
    for (const auto& v : series.volumes) {
        rep.efc.push_back(efc_volume(v, cfg.efc_axis));
        seg.push_back(threshold_labels(v, cfg.eval_threshold));
    }

    auto& tc_row = rep.tc[1];
    for (std::size_t m = 0; m < n; ++m) {
        if (!cfg.eval_fields) {
            tc_row.push_back(tc_identity(seg, m, 1));
            continue;
        }
        FieldMap fields;
        for (auto k : tc_neighbours(m, n)) {
            const fs::path p = *cfg.eval_fields / ("field_" + std::to_string(m) + "_" + std::to_string(k) + ".dfld");
            require_file(p, "displacement field");
            fields.emplace(std::make_pair(m, k), read_field(p));
        }
        tc_row.push_back(tc(seg, fields, m, 1));
    }

    if (label_paths) {
        std::map<std::int32_t, std::vector<double>> rows;
        std::vector<LabelVolume> refs;
        std::int32_t max_class = 0;
        for (const auto& p : *label_paths) {
            refs.push_back(read_labels(p));
            for (auto v : refs.back().data) max_class = std::max(max_class, v);
        }
        for (std::int32_t c = 1; c <= std::max(max_class, 1); ++c)
            for (std::size_t i = 0; i < n; ++i) rep.dice[c].push_back(dice(seg[i], refs[i], c));
    }

    if (ref_paths) {
        double total = 0.0;
        std::size_t voxels = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const Volume3D ref = read_nifti((*ref_paths)[i]);
            const double e = mse(series.volumes[i], ref);
            rep.mse.push_back(e);
            total += e * static_cast<double>(ref.data.size());
            voxels += ref.data.size();
        }
        rep.global_mse = total / static_cast<double>(voxels);
        rep.global_psnr = *rep.global_mse == 0.0 ? std::numeric_limits<double>::infinity()
                                                  : 10.0 * std::log10(cfg.psnr_peak * cfg.psnr_peak / *rep.global_mse);
    }

    const fs::path out = layout::eval_dir(cfg) / "report.tsv";
    write_report(rep, out);
    CommandResult r;
    r.produced.push_back(rel(cfg, out));
    double tc_mean = 0.0;
    for (double v : tc_row) tc_mean += v / static_cast<double>(n);
    r.summary = "eval: mean TC " + num(tc_mean) + (rep.global_mse ? ", global MSE " + num(*rep.global_mse) : std::string());
    return r;
}

CommandResult run_command(const std::string& name, const RunConfig& cfg) {
    Eigen::setNbThreads(cfg.threads);
    CommandResult r;
    if (name == "phantom") r = cmd_phantom(cfg);
    else if (name == "pretrain") r = cmd_pretrain(cfg);
    else if (name == "refine") r = cmd_refine(cfg);
    else if (name == "infer") r = cmd_infer(cfg);
    else if (name == "eval") r = cmd_eval(cfg);
    else fail("unknown command '" + name + "'");
    record_outputs(cfg, name, r.produced);
    return r;
}

} // namespace inr4d
