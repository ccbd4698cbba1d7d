#include "vphm/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "vphm/error.hpp"

namespace vphm {

namespace {

constexpr char kMagic[5] = {'V', 'P', 'H', 'M', '1'};

template <typename T> void put_le(std::vector<std::uint8_t> &out, T value) {
  static_assert(std::is_unsigned_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i)
    out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
}

void put_string(std::vector<std::uint8_t> &out, const std::string &s) {
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.insert(out.end(), s.begin(), s.end());
}

class Reader {
public:
  explicit Reader(const std::vector<std::uint8_t> &bytes) : bytes_(bytes) {}

  template <typename T> T le() {
    need(sizeof(T));
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      value |= static_cast<T>(bytes_[pos_ + i]) << (8 * i);
    pos_ += sizeof(T);
    return value;
  }

  std::string str() {
    auto n = le<std::uint32_t>();
    need(n);
    std::string s(reinterpret_cast<const char *>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n)
      throw Error(Errc::Format, "truncated VPHM1 container");
  }

  std::size_t pos() const { return pos_; }
  void skip(std::size_t n) {
    need(n);
    pos_ += n;
  }
  bool done() const { return pos_ == bytes_.size(); }

private:
  const std::vector<std::uint8_t> &bytes_;
  std::size_t pos_ = 0;
};

} // namespace

void Container::add(std::string name, std::vector<std::uint64_t> shape,
                    std::vector<double> data) {
  std::uint64_t n = 1;
  for (auto d : shape)
    n *= d;
  if (n != data.size())
    throw Error(Errc::ShapeMismatch, "array '" + name + "' shape does not match payload");
  arrays.push_back({std::move(name), std::move(shape), std::move(data)});
}

bool Container::has(const std::string &name) const {
  for (const auto &a : arrays)
    if (a.name == name)
      return true;
  return false;
}

const NamedArray &Container::get(const std::string &name) const {
  for (const auto &a : arrays)
    if (a.name == name)
      return a;
  throw Error(Errc::Format, "container has no array '" + name + "'");
}

std::vector<std::uint8_t> Container::encode() const {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_le<std::uint32_t>(out, kVersion);
  put_string(out, kind);
  put_string(out, kv::format(header));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(arrays.size()));
  for (const auto &a : arrays) {
    put_string(out, a.name);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(a.shape.size()));
    for (auto d : a.shape)
      put_le<std::uint64_t>(out, d);
    for (double v : a.data)
      put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

Container Container::decode(const std::vector<std::uint8_t> &bytes) {
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw Error(Errc::Format, "missing VPHM1 magic");
  Reader rd(bytes);
  rd.skip(sizeof(kMagic));
  auto version = rd.le<std::uint32_t>();
  if (version != kVersion)
    throw Error(Errc::Format, "unsupported VPHM1 version " + std::to_string(version));
  Container c;
  c.kind = rd.str();
  c.header = kv::parse(rd.str());
  auto count = rd.le<std::uint32_t>();
  for (std::uint32_t k = 0; k < count; ++k) {
    NamedArray a;
    a.name = rd.str();
    auto rank = rd.le<std::uint32_t>();
    std::uint64_t n = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      a.shape.push_back(rd.le<std::uint64_t>());
      n *= a.shape.back();
    }
    rd.need(n * 8);
    a.data.resize(n);
    for (auto &v : a.data)
      v = std::bit_cast<double>(rd.le<std::uint64_t>());
    c.arrays.push_back(std::move(a));
  }
  if (!rd.done())
    throw Error(Errc::Format, "trailing bytes after VPHM1 payload");
  return c;
}

void Container::save(const std::filesystem::path &path) const {
  auto bytes = encode();
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw Error(Errc::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char *>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

Container Container::load(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(Errc::Io, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode(bytes);
}

} // namespace vphm
