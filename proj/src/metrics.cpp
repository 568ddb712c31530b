#include "inr4d/metrics.hpp"

#include "inr4d/error.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <limits>
#include <numeric>
#include <sstream>

namespace inr4d {

namespace {

void same_geometry(const Dims& a, const Dims& b, const char* what) {
    require(a == b, std::string("dim mismatch in ") + what);
}

} // namespace

double mse(const Volume3D& a, const Volume3D& b) {
    same_geometry(a.dims, b.dims, "mse");
    require(!a.data.empty(), "mse of empty volumes");
    double s = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        s += d * d;
    }
    return s / static_cast<double>(a.data.size());
}

double psnr(const Volume3D& a, const Volume3D& b, double peak) {
    require(peak > 0.0, "psnr peak must be positive");
    const double e = mse(a, b);
    if (e == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / e);
}

std::optional<double> efc_slice(std::span<const double> slice) {
    require(!slice.empty(), "efc of an empty slice");
    double energy = 0.0;
    for (double x : slice) energy += x * x;
    if (energy == 0.0) return std::nullopt;
    const double x_max = std::sqrt(energy);
    double entropy = 0.0;
    for (double x : slice) {
        const double r = std::fabs(x) / x_max;
        if (r > 0.0) entropy -= r * std::log(r);
    }
    const double s = static_cast<double>(slice.size());
    // |S * (1/sqrt S) * ln(1/sqrt S)|; zero for a single-voxel slice.
    const double norm = std::fabs(s * (1.0 / std::sqrt(s)) * std::log(1.0 / std::sqrt(s)));
    if (norm == 0.0) return 0.0;
    return entropy / norm;
}

double efc_volume(const Volume3D& vol, int slice_axis) {
    vol.validate();
    require(slice_axis >= 0 && slice_axis <= 2, "efc slice axis must be 0, 1 or 2");
    const int n_slices = vol.dims[slice_axis];
    const int u_axis = slice_axis == 0 ? 1 : 0;
    const int v_axis = slice_axis == 2 ? 1 : 2;
    const int nu = vol.dims[u_axis];
    const int nv = vol.dims[v_axis];
    std::vector<double> buf(static_cast<std::size_t>(nu) * static_cast<std::size_t>(nv));
    double sum = 0.0;
    int used = 0;
    for (int k = 0; k < n_slices; ++k) {
        std::size_t j = 0;
        for (int v = 0; v < nv; ++v)
            for (int u = 0; u < nu; ++u) {
                int c[3];
                c[slice_axis] = k;
                c[u_axis] = u;
                c[v_axis] = v;
                buf[j++] = vol.at(c[0], c[1], c[2]);
            }
        if (auto e = efc_slice(buf)) {
            sum += *e;
            ++used;
        }
    }
    require(used > 0, "efc: every slice is background");
    return sum / used;
}

double dice(const LabelVolume& a, const LabelVolume& b, std::int32_t class_id) {
    same_geometry(a.dims, b.dims, "dice");
    require(a.data.size() == b.data.size(), "dice: label data length mismatch");
    std::size_t na = 0, nb = 0, both = 0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const bool in_a = a.data[i] == class_id;
        const bool in_b = b.data[i] == class_id;
        na += in_a;
        nb += in_b;
        both += in_a && in_b;
    }
    if (na + nb == 0) return 100.0;
    return 100.0 * 2.0 * static_cast<double>(both) / static_cast<double>(na + nb);
}

DisplacementField DisplacementField::zero(const Dims& dims, const Spacing& spacing) {
    require(dims.valid(), "invalid dims for displacement field");
    DisplacementField f;
    f.dims = dims;
    f.spacing = spacing;
    f.vectors.assign(dims.count(), {0.0, 0.0, 0.0});
    return f;
}

void DisplacementField::validate() const {
    require(dims.valid(), "displacement field has invalid dims");
    require(vectors.size() == dims.count(), "displacement field length does not match dims");
    for (const auto& v : vectors)
        for (double c : v) require(std::isfinite(c), "non-finite displacement field entry");
}

LabelVolume warp_labels(const LabelVolume& labels, const DisplacementField& field) {
    same_geometry(labels.dims, field.dims, "warp_labels");
    field.validate();
    const Dims& d = labels.dims;
    LabelVolume out(d, labels.spacing);
    std::size_t i = 0;
    for (int z = 0; z < d.nz; ++z)
        for (int y = 0; y < d.ny; ++y)
            for (int x = 0; x < d.nx; ++x, ++i) {
                const auto& u = field.vectors[i];
                const long sx = std::lround(x + u[0]);
                const long sy = std::lround(y + u[1]);
                const long sz = std::lround(z + u[2]);
                if (sx < 0 || sy < 0 || sz < 0 || sx >= d.nx || sy >= d.ny || sz >= d.nz) continue;
                out.data[i] = labels.at(static_cast<int>(sx), static_cast<int>(sy), static_cast<int>(sz));
            }
    return out;
}

std::vector<std::size_t> tc_neighbours(std::size_t m, std::size_t n) {
    require(n >= 2 && m < n, "tc_neighbours: need at least two time points and m < n");
    std::vector<std::size_t> out;
    for (long off : {-2L, -1L, 1L, 2L}) {
        const long k = static_cast<long>(m) + off;
        if (k >= 0 && k < static_cast<long>(n)) out.push_back(static_cast<std::size_t>(k));
    }
    return out;
}

double tc(const std::vector<LabelVolume>& labels, const FieldMap& fields, std::size_t m, std::int32_t class_id) {
    require(m < labels.size(), "tc: time index out of range");
    const auto nbrs = tc_neighbours(m, labels.size());
    require(!nbrs.empty(), "tc: time point has no valid neighbours");
    double sum = 0.0;
    for (auto k : nbrs) {
        auto it = fields.find({m, k});
        require(it != fields.end(), "tc: missing displacement field " + std::to_string(m) + " -> " + std::to_string(k));
        sum += dice(labels[k], warp_labels(labels[m], it->second), class_id);
    }
    return sum / static_cast<double>(nbrs.size());
}

double tc_identity(const std::vector<LabelVolume>& labels, std::size_t m, std::int32_t class_id) {
    require(m < labels.size(), "tc: time index out of range");
    FieldMap fields;
    const auto zero = DisplacementField::zero(labels[m].dims, labels[m].spacing);
    for (auto k : tc_neighbours(m, labels.size())) fields.emplace(std::make_pair(m, k), zero);
    return tc(labels, fields, m, class_id);
}

void write_field(const DisplacementField& field, const std::filesystem::path& path) {
    field.validate();
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(out.good(), "I/O failure: cannot write field " + path.string());
    auto put = [&](const auto& v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); };
    static_assert(std::endian::native == std::endian::little);
    out.write("DFLD", 4);
    put(std::uint32_t{1});
    put(std::int32_t{field.dims.nx});
    put(std::int32_t{field.dims.ny});
    put(std::int32_t{field.dims.nz});
    for (double s : field.spacing) put(s);
    for (const auto& v : field.vectors)
        for (double c : v) put(static_cast<float>(c));
    require(out.good(), "I/O failure: short write to " + path.string());
}

DisplacementField read_field(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "cannot open field " + path.string());
    const std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    constexpr std::size_t header = 4 + 4 + 12 + 24;
    require(bytes.size() >= header && std::memcmp(bytes.data(), "DFLD", 4) == 0, "not a displacement field: " + path.string());
    std::size_t pos = 4;
    auto get = [&]<typename T>(T) {
        T v;
        std::memcpy(&v, bytes.data() + pos, sizeof v);
        pos += sizeof v;
        return v;
    };
    require(get(std::uint32_t{}) == 1, "unsupported displacement field version");
    DisplacementField f;
    f.dims = {get(std::int32_t{}), get(std::int32_t{}), get(std::int32_t{})};
    for (double& s : f.spacing) s = get(double{});
    require(f.dims.valid(), "displacement field has invalid dims");
    require(bytes.size() == header + f.dims.count() * 12, "corrupt file: displacement field payload size");
    f.vectors.resize(f.dims.count());
    for (auto& v : f.vectors)
        for (double& c : v) c = get(float{});
    f.validate();
    return f;
}

void MetricsReport::validate() const {
    const auto n = times.size();
    require(efc.empty() || efc.size() == n, "report: EFC length mismatch");
    require(mse.empty() || mse.size() == n, "report: MSE length mismatch");
    for (double e : efc) require(e >= 0.0, "report: negative EFC");
    for (const auto* table : {&tc, &dice})
        for (const auto& [cls, row] : *table) {
            require(row.size() == n, "report: row length mismatch");
            for (double v : row) require(v >= 0.0 && v <= 100.0, "report: percentage outside [0, 100]");
        }
}

std::string format_report(const MetricsReport& report) {
    report.validate();
    std::ostringstream out;
    out << std::setprecision(10);
    out << "metric\tclass";
    for (double t : report.times) out << '\t' << t;
    out << "\tmean\n";
    auto row = [&](const std::string& name, const std::string& cls, const std::vector<double>& values) {
        if (values.empty()) return;
        out << name << '\t' << cls;
        for (double v : values) out << '\t' << v;
        out << '\t' << std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size()) << '\n';
    };
    row("EFC", "-", report.efc);
    for (const auto& [cls, values] : report.tc) row("TC", std::to_string(cls), values);
    for (const auto& [cls, values] : report.dice) row("DICE", std::to_string(cls), values);
    row("MSE", "-", report.mse);
    if (report.global_mse) out << "GLOBAL_MSE\t-\t" << *report.global_mse << '\n';
    if (report.global_psnr) {
        out << "GLOBAL_PSNR\t-\t";
        if (std::isinf(*report.global_psnr)) out << "inf";
        else out << *report.global_psnr;
        out << '\n';
    }
    return out.str();
}

void write_report(const MetricsReport& report, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    require(out.good(), "I/O failure: cannot write report " + path.string());
    out << format_report(report);
}

} // namespace inr4d
