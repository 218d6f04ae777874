#include "coclust/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "coclust/error.hpp"

namespace coclust {

namespace {

constexpr char kMagic[4] = {'C', 'C', 'K', 'P'};

void put_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void put_string(std::ostream& out, const std::string& s) {
  put_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

class Reader {
 public:
  Reader(std::istream& in, std::string name) : in_(in), name_(std::move(name)) {}

  void bytes(void* dst, std::size_t n) {
    in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) throw DataError(name_ + ": truncated checkpoint");
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    bytes(&v, sizeof v);
    return v;
  }
  std::string string() {
    const std::uint64_t n = u64();
    if (n > (1u << 30)) throw DataError(name_ + ": corrupt string length");
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }

 private:
  std::istream& in_;
  std::string name_;
};

}  // namespace

const Tensor& Checkpoint::at(const std::string& name) const {
  for (const auto& [key, tensor] : tensors) {
    if (key == name) return tensor;
  }
  throw DataError("checkpoint has no tensor '" + name + "'");
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(kMagic, sizeof kMagic);
  const std::uint32_t version = kCheckpointVersion;
  out.write(reinterpret_cast<const char*>(&version), sizeof version);
  put_string(out, checkpoint.config);
  put_u64(out, checkpoint.tensors.size());
  for (const auto& [name, tensor] : checkpoint.tensors) {
    put_string(out, name);
    put_u64(out, tensor.rank());
    for (std::size_t extent : tensor.shape()) put_u64(out, extent);
    out.write(reinterpret_cast<const char*>(tensor.storage().data()),
              static_cast<std::streamsize>(tensor.size() * sizeof(double)));
  }
  if (!out) throw DataError("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  Reader r(in, path.string());
  char magic[4];
  r.bytes(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw DataError(path.string() + ": not a checkpoint");
  }
  std::uint32_t version = 0;
  r.bytes(&version, sizeof version);
  if (version != kCheckpointVersion) {
    throw DataError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint c;
  c.config = r.string();
  const std::uint64_t count = r.u64();
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string name = r.string();
    const std::uint64_t rank = r.u64();
    if (rank == 0 || rank > 2) throw DataError(path.string() + ": bad rank for " + name);
    std::vector<std::size_t> shape(rank);
    std::size_t size = 1;
    for (auto& extent : shape) {
      extent = r.u64();
      if (extent == 0 || extent > (1u << 28)) throw DataError(path.string() + ": bad shape for " + name);
      size *= extent;
    }
    std::vector<double> data(size);
    r.bytes(data.data(), size * sizeof(double));
    c.tensors.emplace_back(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  return c;
}

Checkpoint pack_model(const RunConfig& config, CoClusterModel& model, const Tensor& features,
                      std::size_t epoch) {
  Checkpoint c;
  c.config = to_text(config);
  c.tensors.emplace_back("features", features);
  for (const NamedTensor& p : model.named_parameters()) {
    c.tensors.emplace_back(p.name, Tensor(p.tensor->shape(), p.tensor->storage()));
  }
  for (const NamedTensor& p : model.named_buffers()) {
    c.tensors.emplace_back(p.name, Tensor(p.tensor->shape(), p.tensor->storage()));
  }
  c.tensors.emplace_back("meta.clusters_ready", Tensor::scalar(model.clusters_ready ? 1.0 : 0.0));
  c.tensors.emplace_back("meta.epoch", Tensor::scalar(static_cast<double>(epoch)));
  return c;
}

LoadedModel unpack_model(const Checkpoint& checkpoint) {
  LoadedModel out;
  out.config = parse_run_config(checkpoint.config, "checkpoint config");
  out.model = CoClusterModel::init(out.config.model, out.config.train);
  auto restore = [&](const NamedTensor& p) {
    const Tensor& saved = checkpoint.at(p.name);
    if (!saved.same_shape(*p.tensor)) {
      throw DataError("checkpoint tensor '" + p.name + "' has shape " + saved.shape_string() +
                      ", expected " + p.tensor->shape_string());
    }
    p.tensor->storage() = saved.storage();
  };
  for (const NamedTensor& p : out.model.named_parameters()) restore(p);
  for (const NamedTensor& p : out.model.named_buffers()) restore(p);
  out.model.clusters_ready = checkpoint.at("meta.clusters_ready")[0] != 0.0;
  out.epoch = static_cast<std::size_t>(checkpoint.at("meta.epoch")[0]);
  out.features = checkpoint.at("features");
  return out;
}

}  // namespace coclust
