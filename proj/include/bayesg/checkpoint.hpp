#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "bayesg/trainer.hpp"

// Little-endian binary checkpoints:
//   magic "BAYESGCK", u32 version, u64 config hash, i64 step, i32 episode,
//   u64 config length + config text, u32 tensor count,
//   tensor table {u32 name length, name, u32 rows, u32 cols, u64 offset},
//   then the f64 payload (column-major) at the recorded offsets.
namespace bayesg::harness {

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NamedTensor {
  std::string name;
  Eigen::MatrixXd value;
};

struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::uint64_t config_hash = 0;
  std::int64_t step = 0;
  std::int32_t episode = 0;
  std::string config_text;
  // Parameters, then optimizer moments ("<name>#m", "<name>#v") and per-agent
  // step counts ("agent<i>#adam_t", 1x1).
  std::vector<NamedTensor> tensors;

  const NamedTensor* find(const std::string& name) const;
};

Checkpoint capture(train::Trainer& trainer, const std::string& config_text, std::uint64_t config_hash);
// Copies parameters and optimizer state into the trainer; names and shapes must match.
void restore(train::Trainer& trainer, const Checkpoint& ck);

void write_checkpoint(std::ostream& out, const Checkpoint& ck);
Checkpoint read_checkpoint(std::istream& in);
void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace bayesg::harness
