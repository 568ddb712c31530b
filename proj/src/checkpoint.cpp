#include "inr4d/checkpoint.hpp"

#include "inr4d/error.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <string>

namespace inr4d {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[8] = {'I', 'N', 'R', '4', 'D', 'C', 'K', 'P'};

class Writer {
public:
    template <typename T>
    void put(T v) {
        const auto* p = reinterpret_cast<const unsigned char*>(&v);
        buf_.insert(buf_.end(), p, p + sizeof(T));
    }
    void put_doubles(std::span<const double> v) {
        put<std::uint64_t>(v.size());
        const auto* p = reinterpret_cast<const unsigned char*>(v.data());
        buf_.insert(buf_.end(), p, p + v.size() * sizeof(double));
    }
    std::vector<unsigned char>& bytes() { return buf_; }

private:
    std::vector<unsigned char> buf_;
};

class Reader {
public:
    Reader(const unsigned char* p, std::size_t n) : p_(p), end_(p + n) {}

    template <typename T>
    T get() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, p_, sizeof(T));
        p_ += sizeof(T);
        return v;
    }
    std::vector<double> get_doubles() {
        const auto n = get<std::uint64_t>();
        need(n * sizeof(double));
        std::vector<double> v(n);
        std::memcpy(v.data(), p_, n * sizeof(double));
        p_ += n * sizeof(double);
        return v;
    }
    const unsigned char* pos() const { return p_; }
    std::size_t remaining() const { return static_cast<std::size_t>(end_ - p_); }
    void skip(std::size_t n) {
        need(n);
        p_ += n;
    }

private:
    void need(std::size_t n) const {
        if (n > remaining()) fail("corrupt checkpoint: unexpected end of data");
    }
    const unsigned char* p_;
    const unsigned char* end_;
};

void section(Writer& out, const char (&tag)[5], Writer& body, std::uint32_t& count) {
    auto& b = body.bytes();
    out.bytes().insert(out.bytes().end(), tag, tag + 4);
    out.put<std::uint64_t>(b.size());
    out.bytes().insert(out.bytes().end(), b.begin(), b.end());
    ++count;
}

std::uint32_t crc_of(const unsigned char* p, std::size_t n) {
    uLong crc = crc32(0L, Z_NULL, 0);
    while (n > 0) {
        const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
        crc = crc32(crc, p, chunk);
        p += chunk;
        n -= chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

} // namespace

void save_checkpoint(const InrModel& model, const std::filesystem::path& path, const AdamState* optimizer) {
    require(model.num_params() > 0, "cannot checkpoint an uninitialized model");
    std::uint32_t count = 0;
    Writer sections;

    {
        Writer b;
        const auto& c = model.config();
        b.put<std::int32_t>(c.input_dim);
        b.put<std::int32_t>(c.hidden_width);
        b.put<std::int32_t>(c.n_layers);
        b.put<std::uint32_t>(static_cast<std::uint32_t>(c.skip_layers.size()));
        for (int s : c.skip_layers) b.put<std::int32_t>(s);
        b.put<double>(c.bn_momentum);
        b.put<double>(c.bn_epsilon);
        section(sections, "CONF", b, count);
    }
    {
        Writer b;
        const auto& e = model.encoder;
        b.put<std::uint64_t>(e.seed());
        b.put<std::int32_t>(e.empty() ? 0 : e.space_features());
        b.put<std::int32_t>(e.empty() ? 0 : e.time_features());
        if (!e.empty()) {
            // Row-major so the stored order reads row by row.
            std::vector<double> bs;
            for (int r = 0; r < e.space_features(); ++r)
                for (int c = 0; c < 3; ++c) bs.push_back(e.b_space()(r, c));
            b.put_doubles(bs);
            b.put_doubles(std::span<const double>(e.b_time().data(), static_cast<std::size_t>(e.b_time().size())));
        }
        section(sections, "ENCD", b, count);
    }
    {
        Writer b;
        b.put<double>(model.domain.t_min);
        b.put<double>(model.domain.t_max);
        b.put<double>(model.domain.intensity_min);
        b.put<double>(model.domain.intensity_max);
        b.put<std::int32_t>(model.domain.grid.nx);
        b.put<std::int32_t>(model.domain.grid.ny);
        b.put<std::int32_t>(model.domain.grid.nz);
        for (double sp : model.domain.spacing) b.put<double>(sp);
        section(sections, "DOMN", b, count);
    }
    {
        Writer b;
        b.put<std::uint8_t>(model.mode == Mode::Train ? 0 : 1);
        section(sections, "MODE", b, count);
    }
    {
        Writer b;
        b.put_doubles(model.params());
        section(sections, "PARM", b, count);
    }
    {
        Writer b;
        b.put_doubles(model.running_mean());
        b.put_doubles(model.running_var());
        section(sections, "BNST", b, count);
    }
    if (optimizer) {
        Writer b;
        b.put<std::int64_t>(optimizer->step);
        b.put<double>(optimizer->beta1);
        b.put<double>(optimizer->beta2);
        b.put<double>(optimizer->epsilon);
        b.put_doubles(optimizer->m);
        b.put_doubles(optimizer->v);
        section(sections, "ADAM", b, count);
    }

    Writer file;
    file.bytes().insert(file.bytes().end(), std::begin(kMagic), std::end(kMagic));
    file.put<std::uint32_t>(kCheckpointVersion);
    file.put<std::uint32_t>(count);
    file.bytes().insert(file.bytes().end(), sections.bytes().begin(), sections.bytes().end());
    file.put<std::uint32_t>(crc_of(file.bytes().data(), file.bytes().size()));

    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(out.good(), "I/O failure: cannot write checkpoint " + path.string());
    out.write(reinterpret_cast<const char*>(file.bytes().data()), static_cast<std::streamsize>(file.bytes().size()));
    require(out.good(), "I/O failure: short write to " + path.string());
}

Checkpoint load_checkpoint_full(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "cannot open checkpoint " + path.string());
    const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    require(bytes.size() >= sizeof kMagic + 12, "corrupt checkpoint: file too short");
    require(std::memcmp(bytes.data(), kMagic, sizeof kMagic) == 0, "corrupt checkpoint: bad magic");
    Reader r(bytes.data() + sizeof kMagic, bytes.size() - sizeof kMagic - 4);
    const auto version = r.get<std::uint32_t>();
    require(version == kCheckpointVersion, "version mismatch: checkpoint version " + std::to_string(version) +
                                               ", reader supports " + std::to_string(kCheckpointVersion));
    const auto count = r.get<std::uint32_t>();

    std::map<std::string, Reader> found;
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto* tag = r.pos();
        r.skip(4);
        const auto len = r.get<std::uint64_t>();
        const auto* body = r.pos();
        r.skip(len);
        found.emplace(std::string(reinterpret_cast<const char*>(tag), 4), Reader(body, len));
    }
    require(r.remaining() == 0, "corrupt checkpoint: trailing bytes");
    std::uint32_t stored;
    std::memcpy(&stored, bytes.data() + bytes.size() - 4, 4);
    require(stored == crc_of(bytes.data(), bytes.size() - 4), "corrupt checkpoint: checksum failure");

    auto take = [&](const char* tag) -> Reader& {
        auto it = found.find(tag);
        require(it != found.end(), std::string("corrupt checkpoint: missing section ") + tag);
        return it->second;
    };

    MlpConfig cfg;
    {
        auto& b = take("CONF");
        cfg.input_dim = b.get<std::int32_t>();
        cfg.hidden_width = b.get<std::int32_t>();
        cfg.n_layers = b.get<std::int32_t>();
        cfg.skip_layers.resize(b.get<std::uint32_t>());
        for (auto& s : cfg.skip_layers) s = b.get<std::int32_t>();
        cfg.bn_momentum = b.get<double>();
        cfg.bn_epsilon = b.get<double>();
    }
    Checkpoint ck{InrModel(cfg), std::nullopt};
    InrModel& model = ck.model;
    {
        auto& b = take("ENCD");
        const auto seed = b.get<std::uint64_t>();
        const auto ls = b.get<std::int32_t>();
        const auto lt = b.get<std::int32_t>();
        if (ls > 0) {
            const auto bs = b.get_doubles();
            const auto bt = b.get_doubles();
            require(bs.size() == static_cast<std::size_t>(ls) * 3 && bt.size() == static_cast<std::size_t>(lt),
                    "corrupt checkpoint: encoder shape");
            Eigen::MatrixXd space(ls, 3);
            for (int row = 0; row < ls; ++row)
                for (int c = 0; c < 3; ++c) space(row, c) = bs[static_cast<std::size_t>(row) * 3 + static_cast<std::size_t>(c)];
            model.encoder = FourierEncoder(std::move(space), Eigen::Map<const Eigen::VectorXd>(bt.data(), lt), seed);
            require(model.encoder.feature_dim() == cfg.input_dim, "corrupt checkpoint: encoder/network width mismatch");
        }
    }
    {
        auto& b = take("DOMN");
        model.domain.t_min = b.get<double>();
        model.domain.t_max = b.get<double>();
        model.domain.intensity_min = b.get<double>();
        model.domain.intensity_max = b.get<double>();
        model.domain.grid.nx = b.get<std::int32_t>();
        model.domain.grid.ny = b.get<std::int32_t>();
        model.domain.grid.nz = b.get<std::int32_t>();
        for (double& sp : model.domain.spacing) sp = b.get<double>();
    }
    model.mode = take("MODE").get<std::uint8_t>() == 0 ? Mode::Train : Mode::Eval;
    {
        const auto p = take("PARM").get_doubles();
        require(p.size() == model.num_params(), "corrupt checkpoint: parameter count does not match config");
        auto dst = model.mutable_params();
        std::copy(p.begin(), p.end(), dst.begin());
    }
    {
        auto& b = take("BNST");
        const auto mean = b.get_doubles();
        const auto var = b.get_doubles();
        require(mean.size() == model.running_mean().size() && var.size() == model.running_var().size(),
                "corrupt checkpoint: running-stat size");
        std::copy(mean.begin(), mean.end(), model.running_mean().begin());
        std::copy(var.begin(), var.end(), model.running_var().begin());
    }
    if (auto it = found.find("ADAM"); it != found.end()) {
        auto& b = it->second;
        AdamState s;
        s.step = b.get<std::int64_t>();
        s.beta1 = b.get<double>();
        s.beta2 = b.get<double>();
        s.epsilon = b.get<double>();
        s.m = b.get_doubles();
        s.v = b.get_doubles();
        require(s.m.size() == model.num_params() && s.v.size() == model.num_params(),
                "corrupt checkpoint: optimizer state size");
        ck.optimizer = std::move(s);
    }
    return ck;
}

InrModel load_checkpoint(const std::filesystem::path& path) { return load_checkpoint_full(path).model; }

} // namespace inr4d
