// Copyright 2026 The DABS Authors
// SPDX-License-Identifier: Apache-2.0

#include "dabs/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>

#include "dabs/encoder.hpp"
#include "dabs/error.hpp"

namespace dabs::io {
namespace {

constexpr char kMagic[4] = {'D', 'A', 'B', 'S'};

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& in) : in_(in) {}
  std::uint8_t u8() {
    need(1, "u8");
    return in_[pos_++];
  }
  std::uint32_t u32() {
    need(4, "u32");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8, "u64");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in_[pos_++]) << (8 * i);
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string str(std::size_t n) {
    need(n, "string");
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return in_.size() - pos_; }
  [[noreturn]] void fail(const std::string& what) const { throw FormatError(what, pos_); }

 private:
  void need(std::size_t n, const char* what) const {
    if (in_.size() - pos_ < n)
      throw FormatError(std::string("truncated file while reading ") + what, pos_);
  }
  const std::vector<std::uint8_t>& in_;
  std::size_t pos_ = 0;
};

std::size_t header_fields(FileKind kind) {
  return kind == FileKind::kCheckpoint ? 0 : 3;
}

}  // namespace

std::vector<std::uint8_t> encode_container(const Container& c) {
  Writer w;
  w.bytes(kMagic, 4);
  w.u8(kFormatVersion);
  w.u8(static_cast<std::uint8_t>(c.kind));
  if (c.header.size() != header_fields(c.kind))
    throw InputError("container header has the wrong number of fields");
  for (auto v : c.header) w.u64(v);
  if (c.kind == FileKind::kSubstrate) w.u8(c.flag);
  w.u64(c.records.size());
  for (const auto& r : c.records) {
    if (shape_numel(r.shape) != r.data.size())
      throw DimensionError("record " + r.name + ": shape/data size mismatch");
    w.u32(static_cast<std::uint32_t>(r.name.size()));
    w.bytes(r.name.data(), r.name.size());
    w.u8(static_cast<std::uint8_t>(r.shape.size()));
    for (auto e : r.shape) w.u64(e);
    for (float v : r.data) w.f32(v);
  }
  return w.take();
}

Container decode_container(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  const std::string magic = r.str(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0) throw FormatError("bad magic bytes", 0);
  const std::uint8_t version = r.u8();
  if (version != kFormatVersion)
    throw FormatError("unsupported format version " + std::to_string(version), 4);
  const std::uint8_t kind = r.u8();
  if (kind > 2) throw FormatError("unknown file kind " + std::to_string(kind), 5);
  Container c;
  c.kind = static_cast<FileKind>(kind);
  for (std::size_t i = 0; i < header_fields(c.kind); ++i) c.header.push_back(r.u64());
  if (c.kind == FileKind::kSubstrate) c.flag = r.u8();
  c.records_offset = r.pos();
  const std::uint64_t count = r.u64();
  for (std::uint64_t i = 0; i < count; ++i) {
    Record rec;
    rec.offset = r.pos();
    const std::uint32_t len = r.u32();
    rec.name = r.str(len);
    const std::uint8_t rank = r.u8();
    std::uint64_t numel = 1;
    for (std::uint8_t a = 0; a < rank; ++a) {
      const std::uint64_t e = r.u64();
      if (e == 0) r.fail("zero extent in record " + rec.name);
      rec.shape.push_back(e);
      numel *= e;
    }
    if (numel > r.remaining() / 4)
      r.fail("truncated data for record " + rec.name);
    rec.data.resize(numel);
    for (auto& v : rec.data) v = r.f32();
    c.records.push_back(std::move(rec));
  }
  if (r.remaining() != 0) r.fail("trailing bytes after last record");
  return c;
}

void write_container(const std::string& path, const Container& c) {
  const auto bytes = encode_container(c);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot open for writing: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw InputError("write failed: " + path);
}

Container read_container(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open for reading: " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_container(bytes);
}

template <typename T>
Record to_record(const std::string& name, const Tensor<T>& t) {
  Record r;
  r.name = name;
  r.shape = t.shape();
  r.data.reserve(t.numel());
  for (T v : t.data()) r.data.push_back(static_cast<float>(v));
  return r;
}

template <typename T>
Tensor<T> from_record(const Record& r) {
  std::vector<T> v(r.data.begin(), r.data.end());
  return Tensor<T>::from(r.shape, std::move(v));
}

template <typename T>
void save_checkpoint(const ParameterSet<T>& params, const std::string& path) {
  Container c;
  c.kind = FileKind::kCheckpoint;
  for (const auto& p : params.items()) c.records.push_back(to_record(p.name, p.tensor));
  write_container(path, c);
}

template <typename T>
void load_checkpoint(ParameterSet<T>& params, const std::string& path) {
  const Container c = read_container(path);
  if (c.kind != FileKind::kCheckpoint)
    throw FormatError("not a checkpoint file: " + path, 5);
  std::set<std::string> seen;
  // Validate everything before touching any parameter.
  for (const auto& rec : c.records) {
    if (!params.contains(rec.name))
      throw InputError("checkpoint has unknown parameter " + rec.name);
    if (params.get(rec.name).shape() != rec.shape)
      throw DimensionError("checkpoint parameter " + rec.name + " has shape " +
                           shape_str(rec.shape) + ", model expects " +
                           shape_str(params.get(rec.name).shape()));
    seen.insert(rec.name);
  }
  for (const auto& p : params.items())
    if (!seen.count(p.name)) throw InputError("checkpoint lacks parameter " + p.name);
  for (const auto& rec : c.records) {
    auto dst = params.get(rec.name).mutable_data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<T>(rec.data[i]);
  }
}

template Record to_record(const std::string&, const Tensor<float>&);
template Record to_record(const std::string&, const Tensor<double>&);
template Tensor<float> from_record<float>(const Record&);
template Tensor<double> from_record<double>(const Record&);
template void save_checkpoint(const ParameterSet<float>&, const std::string&);
template void save_checkpoint(const ParameterSet<double>&, const std::string&);
template void load_checkpoint(ParameterSet<float>&, const std::string&);
template void load_checkpoint(ParameterSet<double>&, const std::string&);

}  // namespace dabs::io

namespace dabs {

template <typename T>
void save_stack(const HiddenStack<T>& stack, const std::string& path) {
  io::Container c;
  c.kind = io::FileKind::kStack;
  c.header = {stack.n, stack.width(), stack.layers()};
  for (std::size_t l = 0; l < stack.layers(); ++l)
    c.records.push_back(io::to_record("layer." + std::to_string(l + 1), stack.states[l]));
  io::write_container(path, c);
}

template <typename T>
HiddenStack<T> load_stack(const std::string& path) {
  const io::Container c = io::read_container(path);
  if (c.kind != io::FileKind::kStack) throw FormatError("not a hidden-stack file: " + path, 5);
  const std::uint64_t n = c.header[0], d = c.header[1], layers = c.header[2];
  if (c.records.size() != layers)
    throw FormatError("stack header announces " + std::to_string(layers) +
                          " layers, file holds " + std::to_string(c.records.size()),
                      c.records_offset);
  HiddenStack<T> stack;
  stack.n = n;
  for (const auto& rec : c.records) {
    if (rec.shape != Shape{n, d})
      throw FormatError("stack record " + rec.name + " has shape " +
                            shape_str(rec.shape) + ", header says [" +
                            std::to_string(n) + "x" + std::to_string(d) + "]",
                        rec.offset);
    stack.states.push_back(io::from_record<T>(rec));
  }
  return stack;
}

template void save_stack(const HiddenStack<float>&, const std::string&);
template void save_stack(const HiddenStack<double>&, const std::string&);
template HiddenStack<float> load_stack<float>(const std::string&);
template HiddenStack<double> load_stack<double>(const std::string&);

}  // namespace dabs
