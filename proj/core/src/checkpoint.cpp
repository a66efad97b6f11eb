#include "sgg/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "sgg/error.hpp"

namespace sgg {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

constexpr char kMagic[8] = {'S', 'G', 'G', 'C', 'K', 'P', 'T', '\0'};

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path) : out_(path, std::ios::binary), path_(path) {
    if (!out_) throw DataError("cannot write checkpoint " + path.string());
  }
  template <typename T>
  void pod(const T& v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void str(const std::string& s) {
    pod(static_cast<std::uint32_t>(s.size()));
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void doubles(std::span<const double> v) {
    out_.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
  }
  void raw(const char* p, std::size_t n) { out_.write(p, static_cast<std::streamsize>(n)); }
  void finish() {
    out_.flush();
    if (!out_) throw DataError("write failed: " + path_.string());
  }

 private:
  std::ofstream out_;
  std::filesystem::path path_;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw DataError("cannot read checkpoint " + path.string());
  }
  template <typename T>
  T pod() {
    T v{};
    read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
  }
  std::string str() {
    const auto n = pod<std::uint32_t>();
    if (n > (1u << 20)) fail("implausible string length");
    std::string s(n, '\0');
    read(s.data(), n);
    return s;
  }
  void read(char* p, std::size_t n) {
    in_.read(p, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) fail("truncated file");
  }
  [[noreturn]] void fail(const std::string& what) { throw DataError(path_.string() + ": " + what); }
  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

 private:
  std::ifstream in_;
  std::filesystem::path path_;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const nn::ParamStore& params, const TrainState& state) {
  Writer w(path);
  w.raw(kMagic, sizeof kMagic);
  w.pod(Checkpoint::kVersion);
  w.pod(state.pretrain_done);
  w.pod(state.train_done);
  w.pod(state.seed);
  w.str(state.config_hash);
  w.pod(static_cast<std::uint64_t>(params.entries().size()));
  for (const auto& e : params.entries()) {
    w.str(e.name);
    w.pod(static_cast<std::uint32_t>(e.tensor.rank()));
    for (auto d : e.tensor.shape()) w.pod(static_cast<std::uint64_t>(d));
    w.doubles(e.tensor.data());
  }
  w.finish();
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  Reader r(path);
  char magic[8];
  r.read(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof magic) != 0) r.fail("not a checkpoint file");
  Checkpoint c;
  const auto version = r.pod<std::uint32_t>();
  if (version != Checkpoint::kVersion) r.fail("unsupported checkpoint version " + std::to_string(version));
  c.state.pretrain_done = r.pod<std::uint64_t>();
  c.state.train_done = r.pod<std::uint64_t>();
  c.state.seed = r.pod<std::uint64_t>();
  c.state.config_hash = r.str();
  const auto count = r.pod<std::uint64_t>();
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string name = r.str();
    const auto rank = r.pod<std::uint32_t>();
    if (rank == 0 || rank > 8) r.fail("bad rank for tensor " + name);
    num::Shape shape;
    std::size_t n = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      shape.push_back(static_cast<std::size_t>(r.pod<std::uint64_t>()));
      if (shape.back() == 0 || shape.back() > (1u << 24)) r.fail("bad shape for tensor " + name);
      n *= shape.back();
    }
    if (n > (1u << 26)) r.fail("tensor " + name + " too large");
    std::vector<double> v(n);
    r.read(reinterpret_cast<char*>(v.data()), n * sizeof(double));
    c.tensors.push_back({std::move(name), num::Tensor::from(std::move(shape), std::move(v))});
  }
  if (!r.at_end()) r.fail("trailing bytes after last tensor");
  return c;
}

void restore_params(const Checkpoint& ckpt, nn::ParamStore& params) {
  const auto& entries = params.entries();
  if (entries.size() != ckpt.tensors.size())
    throw DataError("checkpoint holds " + std::to_string(ckpt.tensors.size()) + " tensors, model expects " +
                    std::to_string(entries.size()));
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& want = entries[i];
    const auto& got = ckpt.tensors[i];
    if (want.name != got.name)
      throw DataError("checkpoint tensor " + std::to_string(i) + " is '" + got.name + "', model expects '" +
                      want.name + "'");
    if (want.tensor.shape() != got.tensor.shape())
      throw DataError("checkpoint tensor '" + got.name + "' has shape " + num::shape_string(got.tensor.shape()) +
                      ", model expects " + num::shape_string(want.tensor.shape()));
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    num::Tensor t = entries[i].tensor;
    auto dst = t.mutable_data();
    auto src = ckpt.tensors[i].tensor.data();
    std::copy(src.begin(), src.end(), dst.begin());
  }
}

std::string checkpoint_manifest(const nn::ParamStore& params, const TrainState& state) {
  std::ostringstream o;
  o << "format: sgg-checkpoint v" << Checkpoint::kVersion << "\n";
  o << "pretrain_done: " << state.pretrain_done << "\n";
  o << "train_done: " << state.train_done << "\n";
  o << "seed: " << state.seed << "\n";
  o << "config_hash: " << state.config_hash << "\n";
  o << "tensors: " << params.entries().size() << "\n";
  o << "scalars: " << params.scalar_count() << "\n";
  for (const auto& e : params.entries()) o << e.name << " " << num::shape_string(e.tensor.shape()) << "\n";
  return o.str();
}

}  // namespace sgg
