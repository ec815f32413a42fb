#include "ctl/tensor_io.hpp"

#include <bit>
#include <fstream>
#include <istream>
#include <ostream>

namespace ctl {
namespace {

template <typename U>
void put(std::ostream& out, U value) {
  char bytes[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
  out.write(bytes, sizeof(U));
}

template <typename U>
U get(std::istream& in, const char* what) {
  unsigned char bytes[sizeof(U)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(U))) throw FormatError(std::string("truncated file reading ") + what);
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(bytes[i]) << (8 * i);
  return value;
}

}  // namespace

void write_tensor_table(std::ostream& out, const Magic& magic, std::uint32_t version,
                        const std::vector<TensorRecord>& records) {
  out.write(magic.data(), 4);
  put<std::uint32_t>(out, version);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(records.size()));
  for (const auto& r : records) {
    if (r.name.size() > 0xFFFF) throw FormatError("tensor name too long: " + r.name.substr(0, 32));
    if (r.shape.numel() != r.data.size()) throw DimensionError("record " + r.name + " data does not match its shape");
    put<std::uint16_t>(out, static_cast<std::uint16_t>(r.name.size()));
    out.write(r.name.data(), static_cast<std::streamsize>(r.name.size()));
    put<std::uint8_t>(out, static_cast<std::uint8_t>(r.shape.rank()));
    for (std::size_t i = 0; i < r.shape.rank(); ++i) put<std::uint64_t>(out, r.shape[i]);
    for (float v : r.data) put<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  }
  if (!out) throw FormatError("write failed");
}

std::vector<TensorRecord> read_tensor_table(std::istream& in, const Magic& magic, std::uint32_t version) {
  Magic got{};
  if (!in.read(got.data(), 4)) throw FormatError("truncated file reading magic");
  if (got != magic) {
    throw FormatError("bad magic '" + std::string(got.data(), 4) + "', expected '" + std::string(magic.data(), 4) + "'");
  }
  const auto v = get<std::uint32_t>(in, "version");
  if (v != version) throw FormatError("unsupported version " + std::to_string(v) + ", expected " + std::to_string(version));
  const auto count = get<std::uint32_t>(in, "tensor count");
  std::vector<TensorRecord> records;
  for (std::uint32_t k = 0; k < count; ++k) {
    TensorRecord r;
    const auto len = get<std::uint16_t>(in, "name length");
    r.name.resize(len);
    if (!in.read(r.name.data(), len)) throw FormatError("truncated file reading tensor name");
    const auto rank = get<std::uint8_t>(in, "rank");
    if (rank < 1 || rank > kMaxRank) throw FormatError("tensor " + r.name + " has unsupported rank " + std::to_string(rank));
    std::vector<std::size_t> dims(rank);
    std::uint64_t numel = 1;
    for (auto& d : dims) {
      d = static_cast<std::size_t>(get<std::uint64_t>(in, "extent"));
      numel *= d;
    }
    if (numel > (std::uint64_t{1} << 32)) throw FormatError("tensor " + r.name + " is implausibly large");
    r.shape = Shape(dims);
    r.data.resize(static_cast<std::size_t>(numel));
    for (auto& x : r.data) x = std::bit_cast<float>(get<std::uint32_t>(in, r.name.c_str()));
    records.push_back(std::move(r));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after tensor table");
  return records;
}

void write_tensor_table_file(const std::filesystem::path& path, const Magic& magic, std::uint32_t version,
                             const std::vector<TensorRecord>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  write_tensor_table(out, magic, version, records);
}

std::vector<TensorRecord> read_tensor_table_file(const std::filesystem::path& path, const Magic& magic,
                                                 std::uint32_t version) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return read_tensor_table(in, magic, version);
}

TensorRecord text_record(const std::string& name, const std::string& text) {
  TensorRecord r{name, Shape{std::max<std::size_t>(1, text.size())}, {}};
  for (unsigned char ch : text) r.data.push_back(static_cast<float>(ch));
  if (text.empty()) r.data.push_back(-1.0f);
  return r;
}

std::string record_text(const TensorRecord& record) {
  std::string out;
  for (float v : record.data) {
    if (v < 0) continue;
    if (v > 255 || v != static_cast<float>(static_cast<int>(v))) throw FormatError(record.name + " is not a text record");
    out.push_back(static_cast<char>(static_cast<unsigned char>(v)));
  }
  return out;
}

TensorRecord u64_record(const std::string& name, std::uint64_t value) {
  TensorRecord r{name, Shape{4}, {}};
  for (int i = 0; i < 4; ++i) r.data.push_back(static_cast<float>((value >> (16 * i)) & 0xFFFF));
  return r;
}

std::uint64_t record_u64(const TensorRecord& record) {
  if (record.data.size() != 4) throw FormatError(record.name + " is not a 64-bit integer record");
  std::uint64_t value = 0;
  for (int i = 0; i < 4; ++i) {
    const float v = record.data[i];
    if (v < 0 || v > 65535 || v != static_cast<float>(static_cast<int>(v))) throw FormatError(record.name + " is corrupt");
    value |= static_cast<std::uint64_t>(v) << (16 * i);
  }
  return value;
}

template <typename T>
TensorRecord to_record(const std::string& name, const Tensor<T>& t) {
  return TensorRecord{name, t.shape(), std::vector<float>(t.data().begin(), t.data().end())};
}

template TensorRecord to_record(const std::string&, const Tensor<float>&);
template TensorRecord to_record(const std::string&, const Tensor<double>&);

const TensorRecord& find_record(const std::vector<TensorRecord>& records, const std::string& name) {
  for (const auto& r : records)
    if (r.name == name) return r;
  throw FormatError("missing tensor '" + name + "'");
}

}  // namespace ctl
