// Procedurally generated 2-D pixel manipulation tasks: deterministic grid
// dynamics, seeded resets, scripted experts and success predicates. All
// functions are pure; no shared mutable state.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cilab::taskforge {

struct Color {
  std::uint8_t r = 0, g = 0, b = 0;
};

// Roles drawn back-to-front: background, goal, object, agent.
struct Palette {
  Color background, goal, object, agent;
};

// Inclusive cell rectangle.
struct CellRect {
  int row0 = 0, col0 = 0, row1 = 0, col1 = 0;
  bool contains(int row, int col) const {
    return row >= row0 && row <= row1 && col >= col0 && col <= col1;
  }
  int cells() const { return (row1 - row0 + 1) * (col1 - col0 + 1); }
};

enum class GoalKind { reach, push };

struct TaskSpec {
  int task_id = 1;
  int grid_size = 8;
  int image_size = 32;
  Palette palette;
  GoalKind goal_kind = GoalKind::reach;
  CellRect object_home_region;
  CellRect goal_region;
  // Where the agent starts an episode — the manipulator's home area. Kept
  // small so each task's initial-state distribution is narrow.
  CellRect agent_home_region;
  int max_steps = 40;
};

struct Cell {
  int row = 0, col = 0;
  bool operator==(const Cell&) const = default;
};

struct EnvState {
  Cell agent_cell, object_cell, goal_cell;
  int step_count = 0;
  bool done = false;
  bool succeeded = false;
};

// Pixels in CHW order (3 x size x size), every value in [-1, 1].
struct Frame {
  int size = 0;
  std::vector<double> pixels;
  bool operator==(const Frame&) const = default;
};

enum class ActionId : int {
  pos_row = 0,
  neg_row = 1,
  pos_col = 2,
  neg_col = 3,
  stop = 4,
};
inline constexpr int kNumActions = 5;

// Palettes of distinct tasks must stay at least this far apart (L-inf over
// channels, minimized over roles).
inline constexpr int kMinPaletteDistance = 40;

struct SuiteParams {
  int grid_size = 8;
  int image_size = 32;
  int max_steps = 40;
};

int palette_distance(const Palette& a, const Palette& b);

std::vector<TaskSpec> make_suite(int n_tasks, std::uint64_t seed,
                                 const SuiteParams& params = {});

EnvState reset(const TaskSpec& task, std::uint64_t episode_seed);
EnvState step(const TaskSpec& task, const EnvState& state, ActionId action);
Frame render(const TaskSpec& task, const EnvState& state);
bool is_success(const TaskSpec& task, const EnvState& state);
ActionId expert_action(const TaskSpec& task, const EnvState& state);

void save_suite(const std::vector<TaskSpec>& suite, const std::string& path);
std::vector<TaskSpec> load_suite(const std::string& path);

}  // namespace cilab::taskforge
