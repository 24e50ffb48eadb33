#include "celldeploy/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <unordered_map>

#include "celldeploy/errors.hpp"

namespace celldeploy::nn {

namespace {

constexpr char kMagic[4] = {'C', 'D', 'C', 'K'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

class Reader {
 public:
  Reader(const std::string& data, std::string source) : data_(data), source_(std::move(source)) {}
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw ParseError(source_ + ": truncated checkpoint");
  }
  const std::string& data_;
  std::string source_;
  std::size_t pos_ = 0;
};

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::string out(kMagic, 4);
  put_u32(out, kCheckpointVersion);
  put_u32(out, ckpt.tag);
  put_u32(out, static_cast<std::uint32_t>(ckpt.entries.size()));
  for (const auto& [name, t] : ckpt.entries) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (int d : t.shape()) put_u32(out, static_cast<std::uint32_t>(d));
    for (float v : t.values()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot write checkpoint " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw Error("failed writing checkpoint " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot open checkpoint " + path.string());
  const std::string data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Reader r(data, path.string());
  if (r.bytes(4) != std::string(kMagic, 4)) throw ParseError(path.string() + ": not a checkpoint file");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw ParseError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  Checkpoint ckpt;
  ckpt.tag = r.u32();
  const std::uint32_t count = r.u32();
  for (std::uint32_t k = 0; k < count; ++k) {
    std::string name = r.bytes(r.u32());
    const std::uint32_t ndim = r.u32();
    Shape shape;
    for (std::uint32_t d = 0; d < ndim; ++d) shape.push_back(static_cast<int>(r.u32()));
    Tensor<float> t(shape);
    for (float& v : t.values()) v = std::bit_cast<float>(r.u32());
    ckpt.entries.emplace_back(std::move(name), std::move(t));
  }
  if (!r.done()) throw ParseError(path.string() + ": trailing bytes after checkpoint");
  return ckpt;
}

void append_params(Checkpoint& ckpt, const std::string& prefix, const ParamList<float>& params) {
  for (const auto& p : params) ckpt.entries.emplace_back(prefix + p.name, p.value);
}

void restore_params(const Checkpoint& ckpt, const std::string& prefix, ParamList<float>& params) {
  std::unordered_map<std::string, const Tensor<float>*> by_name;
  for (const auto& [name, t] : ckpt.entries) by_name.emplace(name, &t);
  for (auto& p : params) {
    const auto it = by_name.find(prefix + p.name);
    if (it == by_name.end()) throw ShapeError("checkpoint has no parameter " + prefix + p.name);
    if (it->second->shape() != p.value.shape())
      throw ShapeError("checkpoint parameter " + prefix + p.name + " has shape " + shape_str(it->second->shape()) +
                       ", expected " + shape_str(p.value.shape()));
    p.value = *it->second;
  }
}

}  // namespace celldeploy::nn
