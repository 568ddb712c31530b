#include "inr4d/checkpoint.hpp"
#include "inr4d/commands.hpp"
#include "inr4d/config.hpp"
#include "inr4d/encoding.hpp"
#include "inr4d/error.hpp"
#include "inr4d/metrics.hpp"
#include "inr4d/nifti.hpp"
#include "inr4d/optimizer.hpp"
#include "inr4d/phantom.hpp"
#include "inr4d/series.hpp"
#include "inr4d/training.hpp"

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>

namespace py = pybind11;
using namespace inr4d;

namespace {

using DArray = py::array_t<double, py::array::c_style | py::array::forcecast>;
using IArray = py::array_t<std::int32_t, py::array::c_style | py::array::forcecast>;
using Shape3 = std::array<int, 3>; // numpy order (nz, ny, nx)

Dims dims_of(const py::buffer_info& b, int first_axis) {
    return {static_cast<int>(b.shape[first_axis + 2]), static_cast<int>(b.shape[first_axis + 1]),
            static_cast<int>(b.shape[first_axis])};
}

Volume3D to_volume(const DArray& a, const Spacing& spacing) {
    const auto b = a.request();
    require(b.ndim == 3, "expected a 3-d array shaped (nz, ny, nx)");
    const auto* p = static_cast<const double*>(b.ptr);
    Volume3D v(dims_of(b, 0), spacing, std::vector<double>(p, p + b.size));
    v.validate();
    return v;
}

LabelVolume to_labels(const IArray& a, const Spacing& spacing) {
    const auto b = a.request();
    require(b.ndim == 3, "expected a 3-d label array shaped (nz, ny, nx)");
    LabelVolume l(dims_of(b, 0), spacing);
    std::memcpy(l.data.data(), b.ptr, l.data.size() * sizeof(std::int32_t));
    return l;
}

template <class T>
py::array_t<T> to_numpy(const std::vector<T>& data, const Dims& d) {
    py::array_t<T> out({d.nz, d.ny, d.nx});
    std::memcpy(out.mutable_data(), data.data(), data.size() * sizeof(T));
    return out;
}

template <class T, class Vol>
py::array_t<T> stack(const std::vector<Vol>& vols) {
    require(!vols.empty(), "empty series");
    const Dims d = vols.front().dims;
    py::array_t<T> out({static_cast<py::ssize_t>(vols.size()), static_cast<py::ssize_t>(d.nz),
                        static_cast<py::ssize_t>(d.ny), static_cast<py::ssize_t>(d.nx)});
    T* dst = out.mutable_data();
    for (const auto& v : vols) {
        std::memcpy(dst, v.data.data(), v.data.size() * sizeof(T));
        dst += v.data.size();
    }
    return out;
}

Volume4D to_series(const DArray& a, const std::vector<double>& times, const Spacing& spacing) {
    const auto b = a.request();
    require(b.ndim == 4, "expected a 4-d array shaped (t, nz, ny, nx)");
    require(static_cast<std::size_t>(b.shape[0]) == times.size(), "one time per volume required");
    const Dims d = dims_of(b, 1);
    Volume4D s;
    s.times = times;
    const auto* p = static_cast<const double*>(b.ptr);
    for (std::size_t i = 0; i < times.size(); ++i, p += d.count())
        s.volumes.emplace_back(d, spacing, std::vector<double>(p, p + d.count()));
    s.validate();
    return s;
}

std::vector<LabelVolume> to_label_series(const IArray& a) {
    const auto b = a.request();
    require(b.ndim == 4, "expected a 4-d label array shaped (t, nz, ny, nx)");
    const Dims d = dims_of(b, 1);
    std::vector<LabelVolume> out;
    const auto* p = static_cast<const std::int32_t*>(b.ptr);
    for (py::ssize_t i = 0; i < b.shape[0]; ++i, p += d.count()) {
        out.emplace_back(d, Spacing{1, 1, 1});
        std::memcpy(out.back().data.data(), p, d.count() * sizeof(std::int32_t));
    }
    return out;
}

// (N, 4) C-order shares memory layout with a column-major 4 x N matrix.
Eigen::MatrixXd to_coords(const DArray& a) {
    const auto b = a.request();
    require(b.ndim == 2 && b.shape[1] == 4, "coordinates must be shaped (n, 4)");
    return Eigen::Map<const Eigen::MatrixXd>(static_cast<const double*>(b.ptr), 4, b.shape[0]);
}

py::array_t<double> from_columns(const Eigen::MatrixXd& m) {
    py::array_t<double> out({m.cols(), m.rows()});
    std::memcpy(out.mutable_data(), m.data(), sizeof(double) * m.size());
    return out;
}

py::dict epoch_dict(const RefineEpoch& e) {
    py::dict d;
    d["L1"] = e.l1;
    d["L2"] = e.l2;
    d["L_cross"] = e.l_cross;
    d["L_total"] = e.l_total;
    d["lr"] = e.lr;
    return d;
}

} // namespace

PYBIND11_MODULE(_inr4d, m) {
    m.doc() = "4D implicit neural representation for longitudinal volume series";
    py::register_exception<Error>(m, "Error", PyExc_RuntimeError);

    // ------------------------------------------------------------ volume io
    m.def(
        "read_nifti",
        [](const std::filesystem::path& p) {
            const Volume3D v = read_nifti(p);
            return py::make_tuple(to_numpy(v.data, v.dims), v.spacing);
        },
        py::arg("path"), "Returns (array shaped (nz, ny, nx), spacing (x, y, z)).");
    m.def(
        "write_nifti",
        [](const std::filesystem::path& p, const DArray& a, const Spacing& s) { write_nifti(to_volume(a, s), p); },
        py::arg("path"), py::arg("array"), py::arg("spacing") = Spacing{1, 1, 1});
    m.def(
        "read_labels",
        [](const std::filesystem::path& p) {
            const LabelVolume l = read_labels(p);
            return py::make_tuple(to_numpy(l.data, l.dims), l.spacing);
        },
        py::arg("path"));
    m.def(
        "write_labels",
        [](const std::filesystem::path& p, const IArray& a, const Spacing& s) { write_labels(to_labels(a, s), p); },
        py::arg("path"), py::arg("labels"), py::arg("spacing") = Spacing{1, 1, 1});
    m.def(
        "read_manifest",
        [](const std::filesystem::path& p) {
            std::vector<std::pair<double, std::filesystem::path>> out;
            for (const auto& e : read_manifest(p)) out.emplace_back(e.time_weeks, e.path);
            return out;
        },
        py::arg("path"), "Sorted (weeks, path) pairs with paths resolved.");
    m.def(
        "write_manifest",
        [](const std::filesystem::path& p, const std::vector<std::pair<double, std::filesystem::path>>& entries) {
            std::vector<ManifestEntry> es;
            for (const auto& [t, f] : entries) es.push_back({f, t});
            write_manifest(p, es);
        },
        py::arg("path"), py::arg("entries"));
    m.def(
        "normalize_intensity",
        [](const DArray& a, const std::vector<double>& times) {
            const Volume4D n = normalize_intensity(to_series(a, times, {1, 1, 1}));
            return py::make_tuple(stack<double>(n.volumes), n.intensity_scale);
        },
        py::arg("series"), py::arg("times"), "Returns (series scaled to [0, 1], (min, max)).");

    // ------------------------------------------------------------ encoding
    py::class_<FourierEncoder>(m, "Encoder")
        .def(py::init<int, int, std::uint64_t>(), py::arg("space_features") = 128, py::arg("time_features") = 32,
             py::arg("seed") = 0)
        .def_property_readonly("feature_dim", &FourierEncoder::feature_dim)
        .def_property_readonly("space_features", &FourierEncoder::space_features)
        .def_property_readonly("time_features", &FourierEncoder::time_features)
        .def_property_readonly("seed", &FourierEncoder::seed)
        .def_property_readonly("b_space", [](const FourierEncoder& e) { return Eigen::MatrixXd(e.b_space()); })
        .def_property_readonly("b_time", [](const FourierEncoder& e) { return Eigen::VectorXd(e.b_time()); })
        .def(
            "encode", [](const FourierEncoder& e, const DArray& c) { return from_columns(e.encode_batch(to_coords(c))); },
            py::arg("coords"), "(n, 4) normalized coordinates to (n, feature_dim) features.")
        .def("__eq__", [](const FourierEncoder& a, const FourierEncoder& b) { return a == b; });

    // ------------------------------------------------------------ optimizer
    m.def(
        "lr_at",
        [](double base, double factor, int every, int epoch) { return lr_at({base, factor, every}, epoch); },
        py::arg("base_lr"), py::arg("decay_factor"), py::arg("decay_every"), py::arg("epoch"));
    py::class_<AdamState>(m, "AdamState")
        .def(py::init([](std::size_t n) { return AdamState::for_size(n); }), py::arg("size"))
        .def_readonly("step", &AdamState::step)
        .def_readonly("m", &AdamState::m)
        .def_readonly("v", &AdamState::v);
    m.def(
        "adam_step",
        [](py::array_t<double, py::array::c_style> params, const DArray& grads, AdamState& state, double lr) {
            auto p = params.mutable_unchecked<1>();
            const auto g = grads.request();
            require(g.ndim == 1, "gradients must be 1-d");
            adam_step({p.mutable_data(0), static_cast<std::size_t>(p.shape(0))},
                      {static_cast<const double*>(g.ptr), static_cast<std::size_t>(g.size)}, state, lr);
        },
        py::arg("params"), py::arg("grads"), py::arg("state"), py::arg("lr"), "Updates params in place.");

    // ------------------------------------------------------------ config
    py::class_<RunConfig>(m, "Config")
        .def(py::init([](const std::string& text) { return RunConfig::parse(text); }), py::arg("text") = "")
        .def_static("from_file", &RunConfig::from_file, py::arg("path"))
        .def("set", &RunConfig::set, py::arg("key"), py::arg("value"))
        .def("__setitem__", &RunConfig::set)
        .def("__getitem__",
             [](const RunConfig& c, const std::string& key) {
                 const auto d = c.dump();
                 const auto it = d.find(key);
                 if (it == d.end()) throw py::key_error(key);
                 return it->second;
             })
        .def("dump", &RunConfig::dump)
        .def("validate", &RunConfig::validate)
        .def_readwrite("run_dir", &RunConfig::run_dir)
        .def_static("keys", &RunConfig::keys);

    // ------------------------------------------------------------ phantom
    m.def(
        "generate_phantom",
        [](const RunConfig& c) {
            const PhantomSeries s = generate(c.phantom);
            py::dict d;
            d["clean"] = stack<double>(s.clean);
            d["noisy"] = stack<double>(s.noisy);
            d["labels"] = stack<std::int32_t>(s.labels);
            d["times"] = s.times;
            d["spacing"] = c.phantom.spacing;
            return d;
        },
        py::arg("config"), "Phantom series from the phantom_* config keys.");

    // ------------------------------------------------------------ model
    py::class_<InrModel>(m, "Model")
        .def_property_readonly("num_params", &InrModel::num_params)
        .def_property_readonly("encoder", [](const InrModel& md) { return md.encoder; })
        .def_property_readonly("params",
                               [](const InrModel& md) {
                                   const auto p = md.params();
                                   return std::vector<double>(p.begin(), p.end());
                               })
        .def(
            "predict",
            [](const InrModel& md, const DArray& coords) {
                InrModel e = md;
                e.mode = Mode::Eval;
                const Eigen::MatrixXd c = to_coords(coords);
                py::gil_scoped_release nogil;
                return Eigen::VectorXd(predict(e, e.encoder.encode_batch(c)));
            },
            py::arg("coords"), "Eval-mode output at (n, 4) normalized coordinates.")
        .def(
            "save", [](const InrModel& md, const std::filesystem::path& p) { save_checkpoint(md, p); }, py::arg("path"))
        .def_static("load", &load_checkpoint, py::arg("path"))
        .def("__eq__", [](const InrModel& a, const InrModel& b) { return a == b; });

    // ------------------------------------------------------------ training
    m.def(
        "split_timepoints",
        [](const std::vector<double>& times, std::optional<std::vector<double>> midpoints) {
            const TimeSplit s = midpoints ? split_timepoints(times, *midpoints) : split_timepoints(times);
            py::dict d;
            d["set1"] = s.set1;
            d["set2"] = s.set2;
            d["times1"] = s.times1();
            d["times2"] = s.times2();
            d["midpoints"] = s.midpoints;
            return d;
        },
        py::arg("times"), py::arg("midpoints") = py::none());
    m.def(
        "pretrain",
        [](const DArray& series, const std::vector<double>& times, const std::vector<std::size_t>& indices,
           const RunConfig& c, int stream, const Spacing& spacing) {
            const Volume4D s = to_series(series, times, spacing);
            py::gil_scoped_release nogil;
            PretrainResult r = pretrain(s, indices, c.train, stream);
            return std::make_pair(std::move(r.model), std::move(r.loss_curve));
        },
        py::arg("series"), py::arg("times"), py::arg("indices"), py::arg("config"), py::arg("stream"),
        py::arg("spacing") = Spacing{1, 1, 1},
        "Fits one model to series[indices] (values already in [0, 1]). Returns (model, loss curve).");
    m.def(
        "refine",
        [](const InrModel& m1, const InrModel& m2, const DArray& series, const std::vector<double>& times,
           const RunConfig& c, const Spacing& spacing) {
            const Volume4D s = to_series(series, times, spacing);
            const TimeSplit split = c.midpoints.empty() ? split_timepoints(times) : split_timepoints(times, c.midpoints);
            RefineResult r;
            {
                py::gil_scoped_release nogil;
                r = refine(m1, m2, s, split, c.train);
            }
            py::list history;
            for (const auto& e : r.history.epochs) history.append(epoch_dict(e));
            return py::make_tuple(r.model1, r.model2, history, r.history.best_epoch);
        },
        py::arg("model1"), py::arg("model2"), py::arg("series"), py::arg("times"), py::arg("config"),
        py::arg("spacing") = Spacing{1, 1, 1}, "Returns (model1, model2, history, best_epoch).");
    m.def(
        "reconstruct",
        [](const InrModel& m1, const InrModel& m2, const Shape3& shape, const std::vector<double>& times,
           const Spacing& spacing, std::pair<double, double> scale) {
            InrModel e1 = m1, e2 = m2;
            e1.mode = e2.mode = Mode::Eval;
            Volume4D r;
            {
                py::gil_scoped_release nogil;
                r = reconstruct(e1, e2, Dims{shape[2], shape[1], shape[0]}, spacing, times, scale);
            }
            return stack<double>(r.volumes);
        },
        py::arg("model1"), py::arg("model2"), py::arg("shape"), py::arg("times"),
        py::arg("spacing") = Spacing{1, 1, 1}, py::arg("intensity_scale") = std::make_pair(0.0, 1.0),
        "Averaged model on a (nz, ny, nx) grid at each age; returns (t, nz, ny, nx).");

    // ------------------------------------------------------------ metrics
    m.def(
        "mse", [](const DArray& a, const DArray& b) { return mse(to_volume(a, {1, 1, 1}), to_volume(b, {1, 1, 1})); },
        py::arg("a"), py::arg("b"));
    m.def(
        "psnr",
        [](const DArray& a, const DArray& b, double peak) {
            return psnr(to_volume(a, {1, 1, 1}), to_volume(b, {1, 1, 1}), peak);
        },
        py::arg("a"), py::arg("b"), py::arg("peak") = 1.0);
    m.def(
        "efc_slice",
        [](const DArray& s) {
            const auto b = s.request();
            return efc_slice({static_cast<const double*>(b.ptr), static_cast<std::size_t>(b.size)});
        },
        py::arg("slice"), "None for an all-zero slice.");
    m.def(
        "efc_volume", [](const DArray& v, int axis) { return efc_volume(to_volume(v, {1, 1, 1}), axis); },
        py::arg("volume"), py::arg("slice_axis") = 2, "slice_axis counts x, y, z (z is numpy axis 0).");
    m.def(
        "dice",
        [](const IArray& a, const IArray& b, std::int32_t cls) {
            return dice(to_labels(a, {1, 1, 1}), to_labels(b, {1, 1, 1}), cls);
        },
        py::arg("a"), py::arg("b"), py::arg("class_id"));
    m.def(
        "tc_identity",
        [](const IArray& labels, std::size_t idx, std::int32_t cls) {
            return tc_identity(to_label_series(labels), idx, cls);
        },
        py::arg("labels"), py::arg("index"), py::arg("class_id"), "Temporal consistency with identity fields.");
    m.def("tc_neighbours", &tc_neighbours, py::arg("index"), py::arg("count"));
    m.def(
        "threshold_labels",
        [](const DArray& v, double thr) {
            const LabelVolume l = threshold_labels(to_volume(v, {1, 1, 1}), thr);
            return to_numpy(l.data, l.dims);
        },
        py::arg("volume"), py::arg("threshold"));

    // ------------------------------------------------------------ stages
    m.def(
        "run_command",
        [](const std::string& name, const RunConfig& c) {
            CommandResult r;
            {
                py::gil_scoped_release nogil;
                r = run_command(name, c);
            }
            return py::make_tuple(r.produced, r.summary);
        },
        py::arg("name"), py::arg("config"), "Runs phantom, pretrain, refine, infer or eval under config.run_dir.");
}
