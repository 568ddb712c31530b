#include "inr4d/config.hpp"

#include "inr4d/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

namespace inr4d {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    require(ec == std::errc() && p == v.data() + v.size() && std::isfinite(out),
            "config: " + key + " expects a number, got '" + v + "'");
    return out;
}

long long to_int(const std::string& key, const std::string& v) {
    long long out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    require(ec == std::errc() && p == v.data() + v.size(), "config: " + key + " expects an integer, got '" + v + "'");
    return out;
}

int to_int32(const std::string& key, const std::string& v) {
    const auto x = to_int(key, v);
    require(x >= std::numeric_limits<int>::min() && x <= std::numeric_limits<int>::max(), "config: " + key + " out of range");
    return static_cast<int>(x);
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    require(ec == std::errc() && p == v.data() + v.size(), "config: " + key + " expects a non-negative integer, got '" + v + "'");
    return out;
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::vector<double> to_doubles(const std::string& key, const std::string& v) {
    std::vector<double> out;
    for (const auto& s : split_list(v)) out.push_back(to_double(key, s));
    return out;
}

std::vector<int> to_ints(const std::string& key, const std::string& v) {
    std::vector<int> out;
    for (const auto& s : split_list(v)) out.push_back(to_int32(key, s));
    return out;
}

std::string fmt(double v) {
    std::ostringstream o;
    o.precision(std::numeric_limits<double>::max_digits10);
    o << v;
    return o.str();
}

template <typename T>
std::string join(const std::vector<T>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ",";
        if constexpr (std::is_floating_point_v<T>) s += fmt(v[i]);
        else s += std::to_string(v[i]);
    }
    return s;
}

std::string opt_path(const std::optional<std::filesystem::path>& p) { return p ? p->string() : std::string(); }

struct KeyDef {
    std::string name;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

#define INR4D_NUM(KEY, FIELD, CONV)                                                            \
    KeyDef {                                                                                   \
        KEY, [](RunConfig& c, const std::string& v) { c.FIELD = CONV(KEY, v); },               \
            [](const RunConfig& c) { return fmt(static_cast<double>(c.FIELD)); }               \
    }
#define INR4D_INT(KEY, FIELD, CONV)                                                            \
    KeyDef {                                                                                   \
        KEY, [](RunConfig& c, const std::string& v) { c.FIELD = CONV(KEY, v); },               \
            [](const RunConfig& c) { return std::to_string(c.FIELD); }                         \
    }
#define INR4D_PATH(KEY, FIELD)                                                                 \
    KeyDef {                                                                                   \
        KEY, [](RunConfig& c, const std::string& v) { c.FIELD = v; },                          \
            [](const RunConfig& c) { return opt_path(c.FIELD); }                               \
    }

const std::vector<KeyDef>& key_table() {
    static const std::vector<KeyDef> table = {
        KeyDef{"run_dir", [](RunConfig& c, const std::string& v) { c.run_dir = v; },
               [](const RunConfig& c) { return c.run_dir.string(); }},
        INR4D_PATH("manifest", manifest),
        INR4D_INT("threads", threads, to_int32),

        KeyDef{"phantom_dims",
               [](RunConfig& c, const std::string& v) {
                   const auto d = to_ints("phantom_dims", v);
                   require(d.size() == 3, "config: phantom_dims expects nx,ny,nz");
                   c.phantom.dims = {d[0], d[1], d[2]};
               },
               [](const RunConfig& c) {
                   return join(std::vector<int>{c.phantom.dims.nx, c.phantom.dims.ny, c.phantom.dims.nz});
               }},
        INR4D_INT("phantom_times", phantom.n_times, to_int32),
        INR4D_NUM("phantom_t_start", phantom.t_start, to_double),
        INR4D_NUM("phantom_t_end", phantom.t_end, to_double),
        INR4D_NUM("phantom_outer_r0", phantom.outer_r0, to_double),
        INR4D_NUM("phantom_outer_r1", phantom.outer_r1, to_double),
        INR4D_NUM("phantom_inner_r0", phantom.inner_r0, to_double),
        INR4D_NUM("phantom_inner_r1", phantom.inner_r1, to_double),
        INR4D_NUM("phantom_edge_width", phantom.edge_width, to_double),
        INR4D_NUM("phantom_jitter_sigma", phantom.structural_jitter_sigma, to_double),
        INR4D_NUM("phantom_noise_sigma", phantom.intensity_noise_sigma, to_double),
        INR4D_INT("phantom_seed", phantom.seed, to_u64),

        INR4D_INT("space_features", train.model.space_features, to_int32),
        INR4D_INT("time_features", train.model.time_features, to_int32),
        INR4D_INT("hidden_width", train.model.mlp.hidden_width, to_int32),
        INR4D_INT("n_layers", train.model.mlp.n_layers, to_int32),
        KeyDef{"skip_layers",
               [](RunConfig& c, const std::string& v) { c.train.model.mlp.skip_layers = to_ints("skip_layers", v); },
               [](const RunConfig& c) { return join(c.train.model.mlp.skip_layers); }},
        INR4D_NUM("bn_momentum", train.model.mlp.bn_momentum, to_double),
        INR4D_NUM("bn_epsilon", train.model.mlp.bn_epsilon, to_double),

        INR4D_NUM("lambda", train.lambda_fidelity, to_double),
        INR4D_INT("batch_size", train.batch_size, to_int32),
        INR4D_INT("pretrain_epochs", train.pretrain_epochs, to_int32),
        INR4D_INT("refine_max_epochs", train.refine_max_epochs, to_int32),
        INR4D_INT("patience", train.patience, to_int32),
        INR4D_INT("steps_per_epoch", train.steps_per_epoch, to_int32),
        INR4D_NUM("lr", train.pretrain_schedule.base_lr, to_double),
        INR4D_NUM("lr_decay", train.pretrain_schedule.decay_factor, to_double),
        INR4D_INT("lr_decay_every", train.pretrain_schedule.decay_every, to_int32),
        INR4D_NUM("refine_lr", train.refine_schedule.base_lr, to_double),
        INR4D_NUM("refine_lr_decay", train.refine_schedule.decay_factor, to_double),
        INR4D_INT("refine_lr_decay_every", train.refine_schedule.decay_every, to_int32),
        INR4D_INT("seed_model1", train.seed_model1, to_u64),
        INR4D_INT("seed_model2", train.seed_model2, to_u64),
        INR4D_INT("seed_sampling", train.seed_sampling, to_u64),
        INR4D_PATH("mask", mask),
        KeyDef{"midpoints", [](RunConfig& c, const std::string& v) { c.midpoints = to_doubles("midpoints", v); },
               [](const RunConfig& c) { return join(c.midpoints); }},

        KeyDef{"infer_times", [](RunConfig& c, const std::string& v) { c.infer_times = to_doubles("infer_times", v); },
               [](const RunConfig& c) { return join(c.infer_times); }},
        INR4D_NUM("infer_scale", infer_scale, to_double),
        KeyDef{"infer_from", [](RunConfig& c, const std::string& v) { c.infer_from = v; },
               [](const RunConfig& c) { return c.infer_from; }},

        INR4D_PATH("eval_input", eval_input),
        INR4D_PATH("eval_reference", eval_reference),
        INR4D_PATH("eval_labels", eval_labels),
        INR4D_PATH("eval_fields", eval_fields),
        INR4D_NUM("eval_threshold", eval_threshold, to_double),
        INR4D_INT("efc_axis", efc_axis, to_int32),
        INR4D_NUM("psnr_peak", psnr_peak, to_double),
    };
    return table;
}

#undef INR4D_NUM
#undef INR4D_INT
#undef INR4D_PATH

} // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
    const auto& table = key_table();
    auto it = std::find_if(table.begin(), table.end(), [&](const KeyDef& d) { return d.name == key; });
    require(it != table.end(), "config: unknown key '" + key + "'");
    it->set(*this, trim(value));
}

void RunConfig::apply_override(const std::string& assignment) {
    const auto eq = assignment.find('=');
    require(eq != std::string::npos, "config override '" + assignment + "' is not key=value");
    set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

void RunConfig::validate() const {
    require(!run_dir.empty(), "config: run_dir must be set");
    require(threads >= 1, "config: threads must be >= 1");
    require(infer_scale > 0.0, "config: infer_scale must be positive");
    require(infer_from == "refine" || infer_from == "pretrain", "config: infer_from must be 'refine' or 'pretrain'");
    require(efc_axis >= 0 && efc_axis <= 2, "config: efc_axis must be 0, 1 or 2");
    require(psnr_peak > 0.0, "config: psnr_peak must be positive");
    for (std::size_t i = 1; i < infer_times.size(); ++i)
        require(infer_times[i] > infer_times[i - 1], "config: infer_times must be strictly increasing");
    train.validate();
    phantom.validate();
}

RunConfig RunConfig::parse(const std::string& text, const std::string& origin) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        require(eq != std::string::npos, origin + ":" + std::to_string(lineno) + ": expected key = value");
        try {
            cfg.set(trim(line.substr(0, eq)), line.substr(eq + 1));
        } catch (const Error& e) {
            throw Error(origin + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return cfg;
}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(in.good(), "cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
}

std::map<std::string, std::string> RunConfig::dump() const {
    std::map<std::string, std::string> out;
    for (const auto& d : key_table()) out[d.name] = d.get(*this);
    return out;
}

const std::vector<std::string>& RunConfig::keys() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> v;
        for (const auto& d : key_table()) v.push_back(d.name);
        return v;
    }();
    return names;
}

} // namespace inr4d
