#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "ctl/nn.hpp"

namespace ctl {

// One named entry of a binary tensor table.
struct TensorRecord {
  std::string name;
  Shape shape;
  std::vector<float> data;
};

using Magic = std::array<char, 4>;

// Layout: magic, u32 version, u32 count, then per tensor u16 name length,
// name bytes, u8 rank, u64 extents, f32 values. Integers and floats are
// little-endian.
void write_tensor_table(std::ostream& out, const Magic& magic, std::uint32_t version,
                        const std::vector<TensorRecord>& records);
std::vector<TensorRecord> read_tensor_table(std::istream& in, const Magic& magic, std::uint32_t version);

void write_tensor_table_file(const std::filesystem::path& path, const Magic& magic, std::uint32_t version,
                             const std::vector<TensorRecord>& records);
std::vector<TensorRecord> read_tensor_table_file(const std::filesystem::path& path, const Magic& magic,
                                                 std::uint32_t version);

// Text and 64-bit integers packed into float tensors: one byte or one 16-bit
// chunk per element, both exactly representable.
TensorRecord text_record(const std::string& name, const std::string& text);
std::string record_text(const TensorRecord& record);
TensorRecord u64_record(const std::string& name, std::uint64_t value);
std::uint64_t record_u64(const TensorRecord& record);

template <typename T>
TensorRecord to_record(const std::string& name, const Tensor<T>& t);

// Throws FormatError when the name is absent.
const TensorRecord& find_record(const std::vector<TensorRecord>& records, const std::string& name);

}  // namespace ctl
