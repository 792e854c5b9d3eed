#include <zlib.h>

#include <array>
#include <fstream>
#include <iterator>

#include "cblend/bytes.hpp"
#include "cblend/trainer.hpp"

namespace cblend {
namespace {

// "CBLND1" plus NUL terminator, padded with a second NUL to 8 bytes.
constexpr std::array<std::uint8_t, 8> kMagic{'C', 'B', 'L', 'N', 'D', '1', 0, 0};

// Upper bounds that keep a corrupted header from driving huge allocations.
constexpr std::uint32_t kMaxCount = 1u << 20;

std::uint32_t crc_of(std::span<const std::uint8_t> bytes) {
    uLong crc = crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths; feed in chunks.
    std::size_t pos = 0;
    while (pos < bytes.size()) {
        const std::size_t n = std::min<std::size_t>(bytes.size() - pos, 1u << 30);
        crc = crc32(crc, bytes.data() + pos, static_cast<uInt>(n));
        pos += n;
    }
    return static_cast<std::uint32_t>(crc);
}

void put_tensor(ByteWriter& w, const Tensor& t) { w.raw(serialize_tensor(t)); }

Tensor get_tensor(ByteReader& r, std::span<const std::uint8_t> bytes) {
    std::size_t off = r.offset();
    Tensor t = deserialize_tensor(bytes, off);
    r.raw(off - r.offset());
    return t;
}

std::uint32_t get_count(ByteReader& r, const char* what) {
    const std::size_t at = r.offset();
    const std::uint32_t n = r.u32();
    if (n > kMaxCount) throw FormatError(std::string("implausible ") + what + " count " + std::to_string(n), at);
    return n;
}

} // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ck) {
    ByteWriter w;
    w.raw(kMagic);
    w.u32(kCheckpointVersion);
    w.str(ck.domain_kind);

    const auto& d = ck.net.dims();
    w.u64(d.input);
    w.u64(d.hidden);
    w.u64(d.embed);
    w.u64(d.time);

    const auto& concepts = ck.table.vocab().concepts();
    w.u32(static_cast<std::uint32_t>(concepts.size()));
    for (const auto& c : concepts) w.str(c);
    put_tensor(w, ck.table.vectors());

    w.u32(static_cast<std::uint32_t>(ck.net.params().size()));
    for (std::size_t i = 0; i < ck.net.params().size(); ++i) {
        w.str(ck.net.names()[i]);
        put_tensor(w, ck.net.params()[i]);
    }

    w.u64(ck.adam.step);
    w.u32(static_cast<std::uint32_t>(ck.adam.m.size()));
    for (const auto& t : ck.adam.m) put_tensor(w, t);
    for (const auto& t : ck.adam.v) put_tensor(w, t);

    const auto& c = ck.config;
    w.u64(c.epochs);
    w.u64(c.batch_size);
    w.u64(c.steps_per_epoch);
    w.f64(c.learning_rate);
    w.f64(c.beta1);
    w.f64(c.beta2);
    w.f64(c.adam_eps);
    w.f64(c.p_uncond);
    w.u64(c.seed);
    w.u64(c.t_train);
    w.f64(c.beta_min);
    w.f64(c.beta_max);

    w.u32(static_cast<std::uint32_t>(ck.loss_curve.size()));
    for (double v : ck.loss_curve) w.f64(v);

    const std::uint32_t crc = crc_of(w.bytes());
    w.u32(crc);
    return w.take();
}

Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    const auto magic = r.raw(kMagic.size());
    if (!std::equal(magic.begin(), magic.end(), kMagic.begin())) throw FormatError("bad checkpoint magic", 0);
    const std::size_t version_at = r.offset();
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion) {
        throw UnsupportedVersionError("unsupported checkpoint version " + std::to_string(version) + " (reader knows " +
                                          std::to_string(kCheckpointVersion) + ")",
                                      version_at);
    }
    std::string kind = r.str();

    DenoiserDims dims;
    dims.input = r.u64();
    dims.hidden = r.u64();
    dims.embed = r.u64();
    dims.time = r.u64();

    const std::uint32_t n_concepts = get_count(r, "concept");
    std::vector<std::string> concepts;
    for (std::uint32_t i = 0; i < n_concepts; ++i) concepts.push_back(r.str());
    Tensor table_vectors = get_tensor(r, bytes);

    const std::uint32_t n_params = get_count(r, "parameter");
    std::vector<std::string> names;
    std::vector<Tensor> params;
    for (std::uint32_t i = 0; i < n_params; ++i) {
        names.push_back(r.str());
        params.push_back(get_tensor(r, bytes));
    }

    AdamState adam;
    adam.step = r.u64();
    const std::uint32_t n_moments = get_count(r, "moment");
    for (std::uint32_t i = 0; i < n_moments; ++i) adam.m.push_back(get_tensor(r, bytes));
    for (std::uint32_t i = 0; i < n_moments; ++i) adam.v.push_back(get_tensor(r, bytes));

    TrainConfig c;
    c.epochs = r.u64();
    c.batch_size = r.u64();
    c.steps_per_epoch = r.u64();
    c.learning_rate = r.f64();
    c.beta1 = r.f64();
    c.beta2 = r.f64();
    c.adam_eps = r.f64();
    c.p_uncond = r.f64();
    c.seed = r.u64();
    c.t_train = r.u64();
    c.beta_min = r.f64();
    c.beta_max = r.f64();

    const std::uint32_t n_loss = get_count(r, "loss curve");
    std::vector<double> curve;
    for (std::uint32_t i = 0; i < n_loss; ++i) curve.push_back(r.f64());

    const std::size_t crc_at = r.offset();
    const std::uint32_t stored = r.u32();
    if (r.remaining() != 0) throw FormatError("trailing bytes after checkpoint", r.offset());
    const std::uint32_t actual = crc_of(bytes.first(crc_at));
    if (stored != actual) {
        throw ChecksumError("checkpoint CRC32 mismatch: stored " + std::to_string(stored) + ", computed " +
                                std::to_string(actual),
                            crc_at);
    }

    try {
        BlockConditionalDenoiser<float> net(dims, std::move(names), std::move(params));
        EmbeddingTable table(ConceptVocab(std::move(concepts)), std::move(table_vectors));
        return Checkpoint{std::move(kind), std::move(net), std::move(table), std::move(adam), c, std::move(curve)};
    } catch (const FormatError&) {
        throw;
    } catch (const Error& e) {
        throw FormatError(std::string("inconsistent checkpoint: ") + e.what(), crc_at);
    }
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    std::vector<std::uint8_t> out((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("error reading '" + path.string() + "'");
    return out;
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("error writing '" + path.string() + "'");
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    write_file_bytes(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return deserialize_checkpoint(read_file_bytes(path)); }

} // namespace cblend
