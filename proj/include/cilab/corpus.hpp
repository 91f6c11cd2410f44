// Trajectory data model, demonstration collection, the per-task replay
// buffer, and the on-disk dataset format.
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "cilab/taskforge.hpp"

namespace cilab::corpus {

using taskforge::ActionId;
using taskforge::Frame;
using taskforge::TaskSpec;

enum class Provenance { real, pseudo };

inline constexpr int kUnknownTask = -1;

// Real trajectories carry len(actions)+1 frames (the terminal frame is
// recorded). Pseudo rollouts stop at the STOP action or the step cap and
// carry len(actions) frames; n_pairs() is the usable pair count either way.
struct Trajectory {
  std::vector<Frame> frames;
  std::vector<ActionId> actions;
  int task_tag = kUnknownTask;
  Provenance provenance = Provenance::real;
  bool truncated = false;

  std::size_t n_pairs() const {
    return std::min(frames.size(), actions.size());
  }
  std::size_t n_transitions() const {
    return frames.empty() ? 0 : frames.size() - 1;
  }
  bool operator==(const Trajectory&) const = default;
};

struct DemoSet {
  std::vector<Trajectory> trajectories;
  TaskSpec task;
  std::uint64_t collection_seed = 0;
};

struct BufferComposition {
  int real_trajectories = 0;
  int pseudo_trajectories = 0;
  std::int64_t real_pairs = 0;
  std::int64_t pseudo_pairs = 0;
};

struct ReplayBuffer {
  std::vector<Trajectory> entries;
  int task_index = 1;

  BufferComposition composition() const;
  void teardown();  // releases every stored trajectory
};

struct SampledPair {
  const Frame* frame = nullptr;
  ActionId action = ActionId::stop;
};

struct SampledTransition {
  const Frame* frame = nullptr;
  ActionId action = ActionId::stop;
  const Frame* next = nullptr;
};

DemoSet collect_demos(const TaskSpec& task, int m, std::uint64_t seed);

ReplayBuffer buffer_prepare(const DemoSet& demos,
                            std::vector<Trajectory> pseudo);

// Uniform over the pooled (frame_k, action_k) pairs of all entries.
std::vector<SampledPair> sample_pairs(const ReplayBuffer& buffer,
                                      int batch_size, std::uint64_t rng_seed);

// Uniform over the pooled (frame_k, action_k, frame_{k+1}) transitions.
std::vector<SampledTransition> sample_transitions(const ReplayBuffer& buffer,
                                                  int batch_size,
                                                  std::uint64_t rng_seed);

double mean_demo_length(const DemoSet& demos);  // mean action count

// 8-bit quantization used by the PNG dataset format.
std::uint8_t quantize_channel(double v);
double dequantize_channel(std::uint8_t q);
Frame quantize_frame(const Frame& f);

enum class LoadErrorKind {
  missing_metadata,
  bad_metadata,
  shape_mismatch,
  bad_action,
  missing_file,
};

class LoadError : public std::runtime_error {
 public:
  LoadError(LoadErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  LoadErrorKind kind() const { return kind_; }

 private:
  LoadErrorKind kind_;
};

// Layout under `root`: task_<id>/traj_<k>/frame_<j>.png + actions.csv,
// and task_<id>/meta.json.
void save_dataset(const DemoSet& demos, const std::string& root);
DemoSet load_dataset(const std::string& root, int task_id);

// Same layout for generated data, flagged provenance=pseudo in meta.
void save_pseudo(const std::vector<Trajectory>& pseudo, const TaskSpec& shape_ref,
                 const std::string& root, int bundle_id);

}  // namespace cilab::corpus
