#include "ltdlab/tensor_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include "ltdlab/error.hpp"

namespace ltd {

namespace {

constexpr char kMagic[4] = {'L', 'T', 'D', 'T'};
constexpr std::size_t kFixedHeader = 8;

template <typename U>
void put_le(std::vector<std::uint8_t>& out, U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

template <typename U>
U get_le(const std::uint8_t* p) {
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(p[i]) << (8 * i);
    return v;
}

}  // namespace

std::vector<std::uint8_t> encode_tensor(const Tensor& t, Precision precision) {
    if (t.rank() == 0 || t.rank() > kMaxRank) throw FormatError("rank: must be in [1,4]");
    std::size_t width = precision == Precision::F32 ? 4 : 8;
    std::vector<std::uint8_t> out;
    out.reserve(kFixedHeader + 4 * t.rank() + width * t.numel());
    out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
    out.push_back(static_cast<std::uint8_t>(precision));
    out.push_back(static_cast<std::uint8_t>(t.rank()));
    put_le<std::uint16_t>(out, 0);
    for (auto d : t.shape().dims()) {
        if (d > std::numeric_limits<std::uint32_t>::max()) throw FormatError("dims: extent exceeds u32");
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    }
    for (double v : t.data()) {
        if (precision == Precision::F32) {
            auto f = static_cast<float>(v);
            if (!std::isfinite(f)) throw NumericalError("payload: value out of f32 range");
            put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(f));
        } else {
            put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
        }
    }
    return out;
}

Tensor decode_tensor(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kFixedHeader) throw FormatError("truncated header");
    if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("bad magic");
    std::uint8_t version = bytes[4];
    if (version != 1 && version != 2) throw FormatError("unsupported version " + std::to_string(version));
    std::uint8_t rank = bytes[5];
    if (rank < 1 || rank > kMaxRank) throw FormatError("bad rank " + std::to_string(rank));
    if (get_le<std::uint16_t>(bytes.data() + 6) != 0) throw FormatError("bad reserved field");
    if (bytes.size() < kFixedHeader + 4u * rank) throw FormatError("truncated header");

    std::vector<std::size_t> dims(rank);
    for (std::size_t i = 0; i < rank; ++i) {
        dims[i] = get_le<std::uint32_t>(bytes.data() + kFixedHeader + 4 * i);
        if (dims[i] == 0) throw FormatError("bad dims: zero extent");
    }
    Shape shape(std::move(dims));
    std::size_t width = version == 1 ? 4 : 8;
    std::size_t offset = kFixedHeader + 4u * rank;
    std::size_t expected = width * shape.numel();
    if (bytes.size() - offset < expected) throw FormatError("truncated payload");
    if (bytes.size() - offset > expected) throw FormatError("trailing bytes after payload");

    std::vector<double> data(shape.numel());
    const std::uint8_t* p = bytes.data() + offset;
    for (std::size_t i = 0; i < data.size(); ++i, p += width) {
        data[i] = version == 1 ? static_cast<double>(std::bit_cast<float>(get_le<std::uint32_t>(p)))
                               : std::bit_cast<double>(get_le<std::uint64_t>(p));
        if (!std::isfinite(data[i])) throw FormatError("payload: non-finite value");
    }
    return Tensor(std::move(shape), std::move(data));
}

void save_tensor(const Tensor& t, const std::filesystem::path& path, Precision precision) {
    auto bytes = encode_tensor(t, precision);
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open for writing: " + path.string());
    os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw IoError("write failed: " + path.string());
}

Tensor load_tensor(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open for reading: " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    return decode_tensor(bytes);
}

Tensor round_to_f32(const Tensor& t) {
    Tensor out = t;
    for (auto& v : out.data()) v = static_cast<double>(static_cast<float>(v));
    return out;
}

}  // namespace ltd
