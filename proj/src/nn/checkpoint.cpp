#include "r2ad2/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "r2ad2/error.hpp"
#include "r2ad2/hash.hpp"

namespace r2ad2::nn {

namespace {

class Writer {
 public:
  void raw(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& in) : in_(in) {}
  void raw(void* p, std::size_t n) {
    need(n);
    std::memcpy(p, in_.data() + pos_, n);
    pos_ += n;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > in_.size()) throw IoError("checkpoint truncated");
  }
  const std::string& in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(const Network& net) {
  Writer w;
  w.raw(kCheckpointMagic, sizeof kCheckpointMagic);
  w.u32(kCheckpointVersion);
  const std::string arch = architecture_to_text(net.layers());
  w.u32(static_cast<std::uint32_t>(arch.size()));
  w.raw(arch.data(), arch.size());
  w.f64(net.bn_settings().epsilon);
  w.f64(net.bn_settings().momentum);
  const auto& values = net.params().values;
  w.u64(values.size());
  for (double v : values) w.f64(v);
  const auto& stats = net.running_stats();
  w.u64(stats.size());
  for (const auto& s : stats) {
    w.u32(static_cast<std::uint32_t>(s.layer_id));
    w.u64(s.updates);
    w.u64(s.mean.size());
    for (double v : s.mean) w.f64(v);
    for (double v : s.var) w.f64(v);
  }
  return w.take();
}

Network decode_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  char magic[sizeof kCheckpointMagic];
  r.raw(magic, sizeof magic);
  if (std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0)
    throw IoError("not a checkpoint (bad magic bytes)");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw IoError("unsupported checkpoint version " + std::to_string(version));
  std::string arch(r.u32(), '\0');
  r.raw(arch.data(), arch.size());
  BatchNormSettings bn;
  bn.epsilon = r.f64();
  bn.momentum = r.f64();
  Network net(architecture_from_text(arch), bn);

  FlatParams p = net.params();
  const std::uint64_t n = r.u64();
  if (n != p.size())
    throw IoError("checkpoint holds " + std::to_string(n) + " values, architecture needs " +
                  std::to_string(p.size()));
  for (double& v : p.values) v = r.f64();
  net.set_params(p);

  std::vector<RunningStats> stats(r.u64());
  for (auto& s : stats) {
    s.layer_id = static_cast<int>(r.u32());
    s.updates = r.u64();
    const std::uint64_t dim = r.u64();
    s.mean.resize(dim);
    s.var.resize(dim);
    for (double& v : s.mean) v = r.f64();
    for (double& v : s.var) v = r.f64();
  }
  net.set_running_stats(std::move(stats));
  if (!r.done()) throw IoError("trailing bytes after checkpoint");
  return net;
}

void save_checkpoint(const Network& net, const std::filesystem::path& path) {
  const std::string bytes = encode_checkpoint(net);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

Network load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_checkpoint(ss.str());
}

std::uint64_t checkpoint_hash(const Network& net) {
  const std::string bytes = encode_checkpoint(net);
  return Hasher{}.bytes(bytes.data(), bytes.size()).digest();
}

}  // namespace r2ad2::nn
