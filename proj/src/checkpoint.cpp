#include "bayesg/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace bayesg::harness {

namespace {

constexpr char kMagic[8] = {'B', 'A', 'Y', 'E', 'S', 'G', 'C', 'K'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& in) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw CheckpointError("truncated checkpoint");
  return v;
}

std::string get_string(std::istream& in, std::uint64_t n) {
  if (n > (1ull << 32)) throw CheckpointError("implausible string length in checkpoint");
  std::string s(n, '\0');
  if (n > 0 && !in.read(s.data(), static_cast<std::streamsize>(n)))
    throw CheckpointError("truncated checkpoint");
  return s;
}

}  // namespace

const NamedTensor* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

Checkpoint capture(train::Trainer& trainer, const std::string& config_text, std::uint64_t config_hash) {
  Checkpoint ck;
  ck.config_hash = config_hash;
  ck.step = trainer.step();
  ck.episode = trainer.episode();
  ck.config_text = config_text;
  for (int i = 0; i < trainer.agent_count(); ++i) {
    for (auto* p : trainer.agent(i).parameters()) ck.tensors.push_back({p->name, p->value});
  }
  for (int i = 0; i < trainer.agent_count(); ++i) {
    auto& opt = trainer.agent(i).optimizer();
    const auto params = opt.parameters();
    for (std::size_t k = 0; k < params.size(); ++k) {
      ck.tensors.push_back({params[k]->name + "#m", opt.first_moments()[k]});
      ck.tensors.push_back({params[k]->name + "#v", opt.second_moments()[k]});
    }
    ck.tensors.push_back({"agent" + std::to_string(i) + "#adam_t",
                          Eigen::MatrixXd::Constant(1, 1, static_cast<double>(opt.step_count()))});
  }
  return ck;
}

void restore(train::Trainer& trainer, const Checkpoint& ck) {
  auto fetch = [&ck](const std::string& name, const Eigen::MatrixXd& like) -> const Eigen::MatrixXd& {
    const NamedTensor* t = ck.find(name);
    if (!t) throw CheckpointError("checkpoint lacks tensor \"" + name + "\"");
    if (t->value.rows() != like.rows() || t->value.cols() != like.cols())
      throw CheckpointError("tensor \"" + name + "\" has shape " + std::to_string(t->value.rows()) +
                            "x" + std::to_string(t->value.cols()) + ", expected " +
                            std::to_string(like.rows()) + "x" + std::to_string(like.cols()));
    return t->value;
  };
  std::size_t expected = 0;
  for (int i = 0; i < trainer.agent_count(); ++i) {
    auto& opt = trainer.agent(i).optimizer();
    const auto params = opt.parameters();
    for (std::size_t k = 0; k < params.size(); ++k) {
      params[k]->value = fetch(params[k]->name, params[k]->value);
      opt.first_moments()[k] = fetch(params[k]->name + "#m", params[k]->value);
      opt.second_moments()[k] = fetch(params[k]->name + "#v", params[k]->value);
      expected += 3;
    }
    const auto& t = fetch("agent" + std::to_string(i) + "#adam_t", Eigen::MatrixXd(1, 1));
    opt.set_step_count(static_cast<long long>(t(0, 0)));
    ++expected;
  }
  if (expected != ck.tensors.size())
    throw CheckpointError("checkpoint holds " + std::to_string(ck.tensors.size()) +
                          " tensors but the model expects " + std::to_string(expected) +
                          " (graph or architecture mismatch)");
  trainer.set_progress(ck.step, ck.episode);
}

void write_checkpoint(std::ostream& out, const Checkpoint& ck) {
  out.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, ck.version);
  put<std::uint64_t>(out, ck.config_hash);
  put<std::int64_t>(out, ck.step);
  put<std::int32_t>(out, ck.episode);
  put<std::uint64_t>(out, ck.config_text.size());
  out.write(ck.config_text.data(), static_cast<std::streamsize>(ck.config_text.size()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ck.tensors.size()));
  std::uint64_t offset = 0;
  for (const auto& t : ck.tensors) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.value.rows()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.value.cols()));
    put<std::uint64_t>(out, offset);
    offset += static_cast<std::uint64_t>(t.value.size()) * sizeof(double);
  }
  for (const auto& t : ck.tensors)
    out.write(reinterpret_cast<const char*>(t.value.data()),
              static_cast<std::streamsize>(t.value.size() * sizeof(double)));
  if (!out) throw CheckpointError("failed to write checkpoint");
}

Checkpoint read_checkpoint(std::istream& in) {
  char magic[sizeof kMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw CheckpointError("not a checkpoint (bad magic)");
  Checkpoint ck;
  ck.version = get<std::uint32_t>(in);
  if (ck.version != kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(ck.version) +
                          " (expected " + std::to_string(kCheckpointVersion) + ")");
  ck.config_hash = get<std::uint64_t>(in);
  ck.step = get<std::int64_t>(in);
  ck.episode = get<std::int32_t>(in);
  ck.config_text = get_string(in, get<std::uint64_t>(in));
  const auto count = get<std::uint32_t>(in);
  struct Entry {
    std::string name;
    std::uint32_t rows, cols;
    std::uint64_t offset;
  };
  std::vector<Entry> table;
  for (std::uint32_t k = 0; k < count; ++k) {
    Entry e;
    e.name = get_string(in, get<std::uint32_t>(in));
    e.rows = get<std::uint32_t>(in);
    e.cols = get<std::uint32_t>(in);
    e.offset = get<std::uint64_t>(in);
    table.push_back(std::move(e));
  }
  std::stringstream blob;
  blob << in.rdbuf();
  const std::string data = blob.str();
  for (const auto& e : table) {
    const std::uint64_t bytes = static_cast<std::uint64_t>(e.rows) * e.cols * sizeof(double);
    if (e.offset + bytes > data.size())
      throw CheckpointError("tensor \"" + e.name + "\" extends past the end of the checkpoint");
    Eigen::MatrixXd m(e.rows, e.cols);
    std::memcpy(m.data(), data.data() + e.offset, bytes);
    ck.tensors.push_back({e.name, std::move(m)});
  }
  return ck;
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot open " + path + " for writing");
  write_checkpoint(out, ck);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path);
  return read_checkpoint(in);
}

}  // namespace bayesg::harness
