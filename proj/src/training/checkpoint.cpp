#include "tempora/training/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "tempora/common/error.hpp"
#include "tempora/common/hash.hpp"

namespace tempora::training {

using numerics::Shape;
using numerics::Tensor;

namespace {

constexpr char kMagic[8] = {'T', 'M', 'P', 'R', 'C', 'K', 'P', 'T'};

class Writer {
public:
    void bytes(const void* p, std::size_t n) {
        const auto* c = static_cast<const unsigned char*>(p);
        buf_.insert(buf_.end(), c, c + n);
    }
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<unsigned char>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<unsigned char>(v >> (8 * i)));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void str(const std::string& s) {
        u64(s.size());
        bytes(s.data(), s.size());
    }
    void values(const Tensor& t) {
        for (double v : t.values()) f64(v);
    }
    void params(const model::ParameterSet& ps) {
        u32(static_cast<std::uint32_t>(ps.size()));
        for (const auto& p : ps) {
            u32(static_cast<std::uint32_t>(p.name.size()));
            bytes(p.name.data(), p.name.size());
            u32(static_cast<std::uint32_t>(p.value.rank()));
            for (std::size_t d : p.value.shape()) u64(d);
            values(p.value);
        }
    }
    std::vector<unsigned char>& buffer() { return buf_; }

private:
    std::vector<unsigned char> buf_;
};

class Reader {
public:
    Reader(const std::vector<unsigned char>& buf, std::size_t end, std::string source)
        : buf_(buf), end_(end), source_(std::move(source)) {}

    std::size_t offset() const { return pos_; }
    [[noreturn]] void fail(const std::string& what) const {
        throw artifact_mismatch("checkpoint " + source_ + ": " + what + " at byte offset " + std::to_string(pos_));
    }
    const unsigned char* take(std::size_t n) {
        if (n > end_ - pos_) fail("truncated (needed " + std::to_string(n) + " more bytes)");
        const unsigned char* p = buf_.data() + pos_;
        pos_ += n;
        return p;
    }
    std::uint8_t u8() { return *take(1); }
    std::uint32_t u32() {
        const unsigned char* p = take(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        const unsigned char* p = take(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string str(std::size_t n) {
        const unsigned char* p = take(n);
        return {reinterpret_cast<const char*>(p), n};
    }
    void values(Tensor& t) {
        for (double& v : t.values()) v = f64();
    }
    model::ParameterSet params() {
        model::ParameterSet ps;
        const std::uint32_t count = u32();
        for (std::uint32_t i = 0; i < count; ++i) {
            std::string name = str(u32());
            const std::uint32_t rank = u32();
            if (rank > 8) fail("implausible rank " + std::to_string(rank) + " for " + name);
            Shape shape;
            std::size_t total = 1;
            for (std::uint32_t r = 0; r < rank; ++r) {
                const std::uint64_t d = u64();
                if (d == 0 || d > (end_ - pos_) / 8 + 1) fail("implausible extent for " + name);
                shape.push_back(d);
                total *= d;
            }
            if (total * 8 > end_ - pos_) fail("truncated values for " + name);
            Tensor t(shape, 0.0);
            values(t);
            ps.add(std::move(name), std::move(t));
        }
        return ps;
    }

private:
    const std::vector<unsigned char>& buf_;
    std::size_t end_;
    std::string source_;
    std::size_t pos_ = 0;
};

} // namespace

model::HybridForecaster Checkpoint::forecaster() const {
    return model::HybridForecaster(model::ModelConfig::from_json(config.at("model")), params);
}

Checkpoint make_checkpoint(const TrainResult& result, nlohmann::json config, std::uint64_t seed) {
    config["model"] = result.model.config().to_json();
    Checkpoint c{std::move(config), seed, result.best().params(), ResumePoint{result.model, result.adam, result.state}};
    return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    Writer w;
    w.bytes(kMagic, sizeof kMagic);
    w.u32(kCheckpointVersion);
    w.str(ckpt.config.dump());
    w.u64(ckpt.seed);
    w.params(ckpt.params);
    w.u8(ckpt.resume ? 1 : 0);
    if (ckpt.resume) {
        const ResumePoint& r = *ckpt.resume;
        w.params(r.model.params());
        w.u64(r.adam.step);
        for (const auto& m : r.adam.m) w.values(m);
        for (const auto& v : r.adam.v) w.values(v);
        w.u64(r.state.iteration);
        w.u8(r.state.baseline.initialized ? 1 : 0);
        w.f64(r.state.baseline.value);
        w.f64(r.state.best_val);
        w.u64(r.state.best_iter);
        w.u8(r.state.stopped ? 1 : 0);
        w.params(r.state.best);
    }
    Fnv1a h;
    h.update(w.buffer().data(), w.buffer().size());
    w.u64(h.digest());

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw input_error("cannot write checkpoint " + path.string());
    out.write(reinterpret_cast<const char*>(w.buffer().data()), static_cast<std::streamsize>(w.buffer().size()));
    if (!out) throw input_error("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw input_error("cannot read checkpoint " + path.string());
    const std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const std::string src = path.string();
    if (buf.size() < sizeof kMagic || std::memcmp(buf.data(), kMagic, sizeof kMagic) != 0) {
        throw artifact_mismatch("checkpoint " + src + ": not a checkpoint file (bad magic) at byte offset 0");
    }
    if (buf.size() < sizeof kMagic + 4 + 8) {
        throw artifact_mismatch("checkpoint " + src + ": truncated at byte offset " + std::to_string(buf.size()));
    }
    Reader r(buf, buf.size() - 8, src);
    r.take(sizeof kMagic);
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion) {
        throw artifact_mismatch("checkpoint " + src + ": format version " + std::to_string(version) +
                                " is not supported (expected " + std::to_string(kCheckpointVersion) + ")");
    }
    Fnv1a h;
    h.update(buf.data(), buf.size() - 8);
    Reader tail(buf, buf.size(), src);
    tail.take(buf.size() - 8);
    if (tail.u64() != h.digest()) {
        throw artifact_mismatch("checkpoint " + src + ": checksum mismatch (truncated or corrupt) at byte offset " +
                                std::to_string(buf.size() - 8));
    }

    Checkpoint c;
    const std::uint64_t len = r.u64();
    const std::size_t at = r.offset();
    try {
        c.config = nlohmann::json::parse(r.str(len));
    } catch (const nlohmann::json::exception& e) {
        throw artifact_mismatch("checkpoint " + src + ": unreadable config at byte offset " + std::to_string(at));
    }
    c.seed = r.u64();
    c.params = r.params();
    if (r.u8()) {
        const model::ModelConfig mc = model::ModelConfig::from_json(c.config.at("model"));
        model::ParameterSet current = r.params();
        AdamState adam = adam_init(current);
        adam.step = r.u64();
        for (auto& m : adam.m) r.values(m);
        for (auto& v : adam.v) r.values(v);
        TrainState st;
        st.iteration = r.u64();
        st.baseline.initialized = r.u8() != 0;
        st.baseline.value = r.f64();
        st.best_val = r.f64();
        st.best_iter = r.u64();
        st.stopped = r.u8() != 0;
        st.best = r.params();
        c.resume.emplace(ResumePoint{model::HybridForecaster(mc, std::move(current)), std::move(adam), std::move(st)});
    }
    if (r.offset() != buf.size() - 8) r.fail("unexpected trailing data");
    return c;
}

} // namespace tempora::training
