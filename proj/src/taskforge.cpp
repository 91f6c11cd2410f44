#include "cilab/taskforge.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdlib>
#include <deque>
#include <fstream>
#include <random>
#include <stdexcept>

namespace cilab::taskforge {

namespace {

using json = nlohmann::json;

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  // splitmix64 over the combined words
  std::uint64_t z = a + 0x9e3779b97f4a7c15ull * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

int color_linf(const Color& a, const Color& b) {
  int dr = std::abs(int(a.r) - int(b.r));
  int dg = std::abs(int(a.g) - int(b.g));
  int db = std::abs(int(a.b) - int(b.b));
  return std::max({dr, dg, db});
}

Color random_color(std::mt19937_64& gen) {
  std::uniform_int_distribution<int> d(0, 255);
  return Color{static_cast<std::uint8_t>(d(gen)),
               static_cast<std::uint8_t>(d(gen)),
               static_cast<std::uint8_t>(d(gen))};
}

// Within a task, every role must be clearly separable from every other so
// rendered states stay distinguishable.
constexpr int kMinRoleDistance = 60;

bool roles_distinct(const Palette& p) {
  const Color roles[4] = {p.background, p.goal, p.object, p.agent};
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j)
      if (color_linf(roles[i], roles[j]) < kMinRoleDistance) return false;
  return true;
}

Palette draw_palette(std::mt19937_64& gen,
                     const std::vector<Palette>& existing) {
  for (int attempt = 0; attempt < 100000; ++attempt) {
    Palette p{random_color(gen), random_color(gen), random_color(gen),
              random_color(gen)};
    if (!roles_distinct(p)) continue;
    bool ok = true;
    for (const auto& e : existing)
      if (palette_distance(p, e) < kMinPaletteDistance) ok = false;
    if (ok) return p;
  }
  throw std::runtime_error("taskforge: could not draw a distinguishable palette");
}

Cell delta_of(ActionId a) {
  switch (a) {
    case ActionId::pos_row: return {1, 0};
    case ActionId::neg_row: return {-1, 0};
    case ActionId::pos_col: return {0, 1};
    case ActionId::neg_col: return {0, -1};
    case ActionId::stop: return {0, 0};
  }
  throw std::invalid_argument("taskforge: unknown action");
}

int clampi(int v, int lo, int hi) { return std::min(std::max(v, lo), hi); }

Cell sample_cell(const CellRect& r, std::mt19937_64& gen) {
  std::uniform_int_distribution<int> dr(r.row0, r.row1);
  std::uniform_int_distribution<int> dc(r.col0, r.col1);
  int row = dr(gen);
  int col = dc(gen);
  return {row, col};
}

void fill_rows(Frame& f, const TaskSpec& task, const Cell& cell, int y0,
               int y1, const Color& color) {
  const int cs = task.image_size / task.grid_size;
  const int s = task.image_size;
  const double ch[3] = {color.r / 127.5 - 1.0, color.g / 127.5 - 1.0,
                        color.b / 127.5 - 1.0};
  for (int c = 0; c < 3; ++c)
    for (int y = cell.row * cs + y0; y < cell.row * cs + y1; ++y)
      for (int x = cell.col * cs; x < (cell.col + 1) * cs; ++x)
        f.pixels[static_cast<std::size_t>((c * s + y) * s + x)] = ch[c];
}

// First move of a shortest path from `from` to `to` avoiding `blocked`.
// Neighbor order fixes the tie-break: rows before columns.
ActionId bfs_first_move(const TaskSpec& task, const Cell& from, const Cell& to,
                        const Cell& blocked) {
  const int g = task.grid_size;
  const ActionId order[4] = {ActionId::pos_row, ActionId::neg_row,
                             ActionId::pos_col, ActionId::neg_col};
  std::vector<int> prev_action(static_cast<std::size_t>(g * g), -1);
  std::vector<int> prev_cell(static_cast<std::size_t>(g * g), -1);
  auto id = [g](const Cell& c) { return c.row * g + c.col; };
  std::deque<Cell> queue{from};
  prev_cell[static_cast<std::size_t>(id(from))] = id(from);
  while (!queue.empty()) {
    Cell c = queue.front();
    queue.pop_front();
    if (c == to) break;
    for (ActionId a : order) {
      Cell d = delta_of(a);
      Cell n{c.row + d.row, c.col + d.col};
      if (n.row < 0 || n.row >= g || n.col < 0 || n.col >= g) continue;
      if (n == blocked) continue;
      if (prev_cell[static_cast<std::size_t>(id(n))] != -1) continue;
      prev_cell[static_cast<std::size_t>(id(n))] = id(c);
      prev_action[static_cast<std::size_t>(id(n))] = static_cast<int>(a);
      queue.push_back(n);
    }
  }
  // Walk back from the target to recover the first move.
  int cur = id(to);
  if (prev_cell[static_cast<std::size_t>(cur)] == -1)
    throw std::runtime_error("taskforge: expert target unreachable");
  while (prev_cell[static_cast<std::size_t>(cur)] != id(from))
    cur = prev_cell[static_cast<std::size_t>(cur)];
  return static_cast<ActionId>(prev_action[static_cast<std::size_t>(cur)]);
}

ActionId greedy_toward(const Cell& from, const Cell& to) {
  if (from.row != to.row)
    return to.row > from.row ? ActionId::pos_row : ActionId::neg_row;
  return to.col > from.col ? ActionId::pos_col : ActionId::neg_col;
}

void to_json(json& j, const Color& c) { j = json{c.r, c.g, c.b}; }
Color color_from_json(const json& j) {
  return Color{j.at(0).get<std::uint8_t>(), j.at(1).get<std::uint8_t>(),
               j.at(2).get<std::uint8_t>()};
}

json rect_to_json(const CellRect& r) {
  return json{{"row0", r.row0}, {"col0", r.col0}, {"row1", r.row1},
              {"col1", r.col1}};
}
CellRect rect_from_json(const json& j) {
  return CellRect{j.at("row0").get<int>(), j.at("col0").get<int>(),
                  j.at("row1").get<int>(), j.at("col1").get<int>()};
}

}  // namespace

int palette_distance(const Palette& a, const Palette& b) {
  return std::min({color_linf(a.background, b.background),
                   color_linf(a.goal, b.goal),
                   color_linf(a.object, b.object),
                   color_linf(a.agent, b.agent)});
}

std::vector<TaskSpec> make_suite(int n_tasks, std::uint64_t seed,
                                 const SuiteParams& params) {
  if (n_tasks < 1)
    throw std::invalid_argument("make_suite: n_tasks must be >= 1");
  if (params.grid_size < 6)
    throw std::invalid_argument("make_suite: grid_size must be >= 6");
  if (params.image_size % params.grid_size != 0)
    throw std::invalid_argument(
        "make_suite: image_size must be divisible by grid_size");
  if (params.image_size < 2 * params.grid_size)
    throw std::invalid_argument(
        "make_suite: need at least 2 pixels per cell");

  std::mt19937_64 gen(mix_seed(seed, 0xc11ab));
  std::vector<Palette> palettes;
  std::vector<TaskSpec> suite;
  const int g = params.grid_size;
  for (int t = 1; t <= n_tasks; ++t) {
    TaskSpec spec;
    spec.task_id = t;
    spec.grid_size = g;
    spec.image_size = params.image_size;
    spec.max_steps = params.max_steps;
    spec.goal_kind = (t % 2 == 1) ? GoalKind::reach : GoalKind::push;
    // Narrow initial-configuration regions: the agent departs from a small
    // home corner, objects start near the top-left, goals sit near the
    // bottom-right. All stay one cell away from the walls where a push could
    // otherwise become impossible, and the small cross-product keeps the
    // per-task first-frame distribution compact enough for generative replay
    // to model.
    spec.object_home_region = CellRect{1, 1, 2, 2};
    spec.goal_region = CellRect{g - 2, g - 3, g - 2, g - 2};
    spec.agent_home_region = CellRect{0, 0, 0, 1};
    spec.palette = draw_palette(gen, palettes);
    palettes.push_back(spec.palette);
    suite.push_back(spec);
  }
  return suite;
}

EnvState reset(const TaskSpec& task, std::uint64_t episode_seed) {
  std::mt19937_64 gen(
      mix_seed(episode_seed, static_cast<std::uint64_t>(task.task_id)));
  EnvState s;
  s.object_cell = sample_cell(task.object_home_region, gen);
  s.goal_cell = sample_cell(task.goal_region, gen);
  s.agent_cell = sample_cell(task.agent_home_region, gen);
  // In push tasks the agent never shares a cell with the object.
  while (task.goal_kind == GoalKind::push && s.agent_cell == s.object_cell)
    s.agent_cell = sample_cell(task.agent_home_region, gen);
  return s;
}

EnvState step(const TaskSpec& task, const EnvState& state, ActionId action) {
  if (state.done)
    throw std::logic_error("step: called on a finished episode");
  EnvState s = state;
  if (action == ActionId::stop) {
    s.done = true;
  } else {
    Cell d = delta_of(action);
    Cell next{clampi(s.agent_cell.row + d.row, 0, task.grid_size - 1),
              clampi(s.agent_cell.col + d.col, 0, task.grid_size - 1)};
    if (task.goal_kind == GoalKind::push && next == s.object_cell) {
      s.object_cell = {clampi(s.object_cell.row + d.row, 0, task.grid_size - 1),
                       clampi(s.object_cell.col + d.col, 0,
                              task.grid_size - 1)};
    }
    s.agent_cell = next;
  }
  ++s.step_count;
  if (s.step_count >= task.max_steps) s.done = true;
  if (s.done) s.succeeded = is_success(task, s);
  return s;
}

Frame render(const TaskSpec& task, const EnvState& state) {
  Frame f;
  f.size = task.image_size;
  const int s = task.image_size;
  f.pixels.resize(static_cast<std::size_t>(3 * s * s));
  const Color& bg = task.palette.background;
  const double ch[3] = {bg.r / 127.5 - 1.0, bg.g / 127.5 - 1.0,
                        bg.b / 127.5 - 1.0};
  for (int c = 0; c < 3; ++c)
    std::fill(f.pixels.begin() + c * s * s, f.pixels.begin() + (c + 1) * s * s,
              ch[c]);
  // Per occupied cell, stack the present entities by priority (agent over
  // object over goal). A lone entity fills the cell; co-occupants split it
  // into a top and bottom band, so any state is reconstructable from pixels.
  const int cs = task.image_size / task.grid_size;
  struct Entry {
    Cell cell;
    Color color;
  };
  const Entry entries[3] = {{state.agent_cell, task.palette.agent},
                            {state.object_cell, task.palette.object},
                            {state.goal_cell, task.palette.goal}};
  for (int i = 0; i < 3; ++i) {
    bool covered = false;
    for (int j = 0; j < i; ++j)
      if (entries[j].cell == entries[i].cell) covered = true;
    if (covered) continue;
    std::vector<const Entry*> stack{&entries[i]};
    for (int j = i + 1; j < 3; ++j)
      if (entries[j].cell == entries[i].cell) stack.push_back(&entries[j]);
    if (stack.size() == 1) {
      fill_rows(f, task, entries[i].cell, 0, cs, entries[i].color);
    } else {
      const int split = (cs + 1) / 2;
      fill_rows(f, task, entries[i].cell, 0, split, stack[0]->color);
      fill_rows(f, task, entries[i].cell, split, cs, stack[1]->color);
    }
  }
  return f;
}

bool is_success(const TaskSpec& task, const EnvState& state) {
  if (task.goal_kind == GoalKind::reach)
    return state.agent_cell == state.goal_cell;
  return state.object_cell == state.goal_cell;
}

ActionId expert_action(const TaskSpec& task, const EnvState& state) {
  if (state.done)
    throw std::logic_error("expert_action: called on a finished episode");
  if (is_success(task, state)) return ActionId::stop;
  if (task.goal_kind == GoalKind::reach)
    return greedy_toward(state.agent_cell, state.goal_cell);

  // Push: line the object up on the goal row first, then on the goal column.
  const Cell& obj = state.object_cell;
  const Cell& goal = state.goal_cell;
  Cell push_dir;
  if (obj.row != goal.row)
    push_dir = {goal.row > obj.row ? 1 : -1, 0};
  else
    push_dir = {0, goal.col > obj.col ? 1 : -1};
  Cell behind{obj.row - push_dir.row, obj.col - push_dir.col};
  if (state.agent_cell == behind) return greedy_toward(state.agent_cell, obj);
  return bfs_first_move(task, state.agent_cell, behind, obj);
}

void save_suite(const std::vector<TaskSpec>& suite, const std::string& path) {
  json tasks = json::array();
  for (const auto& t : suite) {
    json pal;
    json c;
    to_json(c, t.palette.background);
    pal["background"] = c;
    to_json(c, t.palette.goal);
    pal["goal"] = c;
    to_json(c, t.palette.object);
    pal["object"] = c;
    to_json(c, t.palette.agent);
    pal["agent"] = c;
    tasks.push_back(json{
        {"task_id", t.task_id},
        {"grid_size", t.grid_size},
        {"image_size", t.image_size},
        {"max_steps", t.max_steps},
        {"goal_kind", t.goal_kind == GoalKind::reach ? "reach" : "push"},
        {"palette", pal},
        {"object_home_region", rect_to_json(t.object_home_region)},
        {"goal_region", rect_to_json(t.goal_region)},
        {"agent_home_region", rect_to_json(t.agent_home_region)},
    });
  }
  json root{{"format", "cilab-suite-v1"}, {"tasks", tasks}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_suite: cannot open " + path);
  out << root.dump(2) << "\n";
}

std::vector<TaskSpec> load_suite(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_suite: cannot open " + path);
  json root = json::parse(in);
  if (root.value("format", "") != "cilab-suite-v1")
    throw std::runtime_error("load_suite: unknown suite format in " + path);
  std::vector<TaskSpec> suite;
  for (const auto& j : root.at("tasks")) {
    TaskSpec t;
    t.task_id = j.at("task_id").get<int>();
    t.grid_size = j.at("grid_size").get<int>();
    t.image_size = j.at("image_size").get<int>();
    t.max_steps = j.at("max_steps").get<int>();
    std::string kind = j.at("goal_kind").get<std::string>();
    if (kind == "reach")
      t.goal_kind = GoalKind::reach;
    else if (kind == "push")
      t.goal_kind = GoalKind::push;
    else
      throw std::runtime_error("load_suite: unknown goal_kind " + kind);
    const auto& pal = j.at("palette");
    t.palette.background = color_from_json(pal.at("background"));
    t.palette.goal = color_from_json(pal.at("goal"));
    t.palette.object = color_from_json(pal.at("object"));
    t.palette.agent = color_from_json(pal.at("agent"));
    t.object_home_region = rect_from_json(j.at("object_home_region"));
    t.goal_region = rect_from_json(j.at("goal_region"));
    t.agent_home_region = rect_from_json(j.at("agent_home_region"));
    suite.push_back(t);
  }
  return suite;
}

}  // namespace cilab::taskforge
