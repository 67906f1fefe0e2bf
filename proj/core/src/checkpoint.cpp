#include "ecopo/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "ecopo/error.hpp"

namespace ecopo {

namespace {

constexpr char kMagic[4] = {'E', 'C', 'K', 'P'};

// All scalar fields are serialized little-endian; the layout is only
// implemented for little-endian hosts.
static_assert(std::endian::native == std::endian::little,
              "checkpoint serialization requires a little-endian host");

template <typename T>
void put(std::string& out, T value) {
    char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    out.append(buf, sizeof(T));
}

void put_f64(std::string& out, double value) {
    put(out, std::bit_cast<std::uint64_t>(value));
}

class Reader {
public:
    Reader(const char* data, std::size_t size) : data_(data), size_(size) {}

    template <typename T>
    T get() {
        if (pos_ + sizeof(T) > size_) {
            throw CheckpointError(CheckpointError::Kind::Truncated, "truncated checkpoint");
        }
        T value;
        std::memcpy(&value, data_ + pos_, sizeof(T));
        pos_ += sizeof(T);
        return value;
    }

    double get_f64() { return std::bit_cast<double>(get<std::uint64_t>()); }

    std::size_t remaining() const { return size_ - pos_; }

private:
    const char* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
};

void put_array(std::string& out, const std::vector<double>& v) {
    for (double x : v) {
        put_f64(out, x);
    }
}

void get_array(Reader& r, std::vector<double>& v) {
    for (double& x : v) {
        x = r.get_f64();
    }
}

}  // namespace

void save_checkpoint(const ModelParams& params, const Vocabulary& vocab, const std::string& path) {
    if (vocab.size() != params.dims.vocab) {
        throw CheckpointError(CheckpointError::Kind::DimensionMismatch,
                              "vocabulary size does not match model vocab dimension");
    }
    std::string out;
    out.append(kMagic, sizeof(kMagic));
    put<std::uint32_t>(out, kCheckpointVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(params.dims.vocab));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(params.dims.d_emb));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(params.dims.hidden));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(params.dims.window));
    put<std::uint64_t>(out, params.init_seed);
    // Content characters only; PAD and UNK are implicit at ids 0 and 1.
    for (std::int32_t id = 2; id < vocab.size(); ++id) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(vocab.char_of(id)));
    }
    put_array(out, params.embedding);
    put_array(out, params.enc_w);
    put_array(out, params.enc_b);
    put_array(out, params.proj_w);
    put_array(out, params.proj_b);

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) {
        throw CheckpointError(CheckpointError::Kind::Io, "cannot open checkpoint for writing: " + path);
    }
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) {
        throw CheckpointError(CheckpointError::Kind::Io, "checkpoint write failure: " + path);
    }
}

std::pair<ModelParams, Vocabulary> load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw CheckpointError(CheckpointError::Kind::Io, "cannot open checkpoint: " + path);
    }
    std::string data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (f.bad()) {
        throw CheckpointError(CheckpointError::Kind::Io, "checkpoint read failure: " + path);
    }

    Reader r(data.data(), data.size());
    if (data.size() < sizeof(kMagic) || std::memcmp(data.data(), kMagic, sizeof(kMagic)) != 0) {
        throw CheckpointError(CheckpointError::Kind::BadMagic, "not a checkpoint file: " + path);
    }
    (void)r.get<std::uint32_t>();  // skip magic (4 bytes)
    const auto version = r.get<std::uint32_t>();
    if (version != kCheckpointVersion) {
        throw CheckpointError(CheckpointError::Kind::VersionMismatch,
                              "unsupported checkpoint version " + std::to_string(version));
    }
    ModelDims dims;
    dims.vocab = static_cast<std::int32_t>(r.get<std::uint32_t>());
    dims.d_emb = static_cast<std::int32_t>(r.get<std::uint32_t>());
    dims.hidden = static_cast<std::int32_t>(r.get<std::uint32_t>());
    dims.window = static_cast<std::int32_t>(r.get<std::uint32_t>());
    if (dims.vocab < 2 || dims.d_emb < 1 || dims.hidden < 1 || dims.window < 1) {
        throw CheckpointError(CheckpointError::Kind::DimensionMismatch,
                              "checkpoint header carries invalid dimensions");
    }
    const auto init_seed = r.get<std::uint64_t>();

    // Check the payload size against the header before allocating anything,
    // so corrupt headers surface as checkpoint errors rather than bad_alloc.
    const auto v = static_cast<std::uint64_t>(dims.vocab);
    const auto de = static_cast<std::uint64_t>(dims.d_emb);
    const auto hi = static_cast<std::uint64_t>(dims.hidden);
    const std::uint64_t ei = (2 * static_cast<std::uint64_t>(dims.window) + 1) * de;
    const std::uint64_t expected =
        (v - 2) * 4 + (v * de + hi * ei + hi + v * hi + v) * 8;
    if (r.remaining() < expected) {
        throw CheckpointError(CheckpointError::Kind::Truncated, "truncated checkpoint");
    }
    if (r.remaining() > expected) {
        throw CheckpointError(CheckpointError::Kind::TrailingData,
                              "checkpoint carries trailing bytes");
    }

    std::vector<char32_t> content;
    content.reserve(static_cast<std::size_t>(dims.vocab) - 2);
    for (std::int32_t i = 2; i < dims.vocab; ++i) {
        content.push_back(static_cast<char32_t>(r.get<std::uint32_t>()));
    }
    Vocabulary vocab = [&] {
        try {
            return Vocabulary::from_content_chars(content);
        } catch (const Error& e) {
            throw CheckpointError(CheckpointError::Kind::DimensionMismatch, e.what());
        }
    }();

    ModelParams params;
    params.dims = dims;
    params.init_seed = init_seed;
    params.embedding.resize(static_cast<std::size_t>(dims.vocab) * dims.d_emb);
    params.enc_w.resize(static_cast<std::size_t>(dims.hidden) * dims.enc_in());
    params.enc_b.resize(static_cast<std::size_t>(dims.hidden));
    params.proj_w.resize(static_cast<std::size_t>(dims.vocab) * dims.hidden);
    params.proj_b.resize(static_cast<std::size_t>(dims.vocab));
    get_array(r, params.embedding);
    get_array(r, params.enc_w);
    get_array(r, params.enc_b);
    get_array(r, params.proj_w);
    get_array(r, params.proj_b);

    if (r.remaining() != 0) {
        throw CheckpointError(CheckpointError::Kind::TrailingData,
                              "checkpoint carries trailing bytes");
    }
    return {std::move(params), std::move(vocab)};
}

}  // namespace ecopo
