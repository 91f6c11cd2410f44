#include "cilab/corpus.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "cilab/png_io.hpp"

namespace cilab::corpus {

namespace fs = std::filesystem;
using json = nlohmann::json;
using taskforge::GoalKind;

namespace {

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ull * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

pngio::Image8 frame_to_image(const Frame& f) {
  pngio::Image8 img;
  img.width = img.height = f.size;
  const int s = f.size;
  img.rgb.resize(static_cast<std::size_t>(3 * s * s));
  for (int y = 0; y < s; ++y)
    for (int x = 0; x < s; ++x)
      for (int c = 0; c < 3; ++c)
        img.rgb[static_cast<std::size_t>(3 * (y * s + x) + c)] =
            quantize_channel(f.pixels[static_cast<std::size_t>((c * s + y) * s + x)]);
  return img;
}

Frame image_to_frame(const pngio::Image8& img) {
  Frame f;
  f.size = img.width;
  const int s = f.size;
  f.pixels.resize(static_cast<std::size_t>(3 * s * s));
  for (int y = 0; y < s; ++y)
    for (int x = 0; x < s; ++x)
      for (int c = 0; c < 3; ++c)
        f.pixels[static_cast<std::size_t>((c * s + y) * s + x)] =
            dequantize_channel(img.rgb[static_cast<std::size_t>(3 * (y * s + x) + c)]);
  return f;
}

void write_trajectory_dir(const Trajectory& traj, const fs::path& dir) {
  fs::create_directories(dir);
  for (std::size_t j = 0; j < traj.frames.size(); ++j)
    pngio::write_png((dir / ("frame_" + std::to_string(j) + ".png")).string(),
                     frame_to_image(traj.frames[j]));
  std::ofstream acts(dir / "actions.csv");
  for (ActionId a : traj.actions) acts << static_cast<int>(a) << "\n";
}

struct TrajMeta {
  std::size_t n_frames = 0;
  std::size_t n_actions = 0;
  bool truncated = false;
  Provenance provenance = Provenance::real;
  int task_tag = kUnknownTask;
};

json traj_meta_to_json(const Trajectory& t) {
  return json{{"n_frames", t.frames.size()},
              {"n_actions", t.actions.size()},
              {"truncated", t.truncated},
              {"provenance", t.provenance == Provenance::real ? "real" : "pseudo"},
              {"task_tag", t.task_tag}};
}

Trajectory read_trajectory_dir(const fs::path& dir, const json& meta,
                               int image_size, const std::string& label) {
  Trajectory traj;
  std::size_t n_frames = meta.at("n_frames").get<std::size_t>();
  std::size_t n_actions = meta.at("n_actions").get<std::size_t>();
  traj.truncated = meta.at("truncated").get<bool>();
  traj.provenance = meta.at("provenance").get<std::string>() == "real"
                        ? Provenance::real
                        : Provenance::pseudo;
  traj.task_tag = meta.at("task_tag").get<int>();
  for (std::size_t j = 0; j < n_frames; ++j) {
    fs::path p = dir / ("frame_" + std::to_string(j) + ".png");
    if (!fs::exists(p))
      throw LoadError(LoadErrorKind::missing_file,
                      "load_dataset: missing frame file " + p.string());
    pngio::Image8 img = pngio::read_png(p.string());
    if (img.width != image_size || img.height != image_size)
      throw LoadError(LoadErrorKind::shape_mismatch,
                      "load_dataset: frame size " + std::to_string(img.width) +
                          "x" + std::to_string(img.height) + " in " + label +
                          " does not match expected " +
                          std::to_string(image_size));
    traj.frames.push_back(image_to_frame(img));
  }
  std::ifstream acts(dir / "actions.csv");
  if (!acts)
    throw LoadError(LoadErrorKind::missing_file,
                    "load_dataset: missing actions.csv in " + label);
  std::string line;
  while (std::getline(acts, line)) {
    if (line.empty()) continue;
    int a = std::stoi(line);
    if (a < 0 || a >= taskforge::kNumActions)
      throw LoadError(LoadErrorKind::bad_action,
                      "load_dataset: action " + std::to_string(a) +
                          " out of range in " + label);
    traj.actions.push_back(static_cast<ActionId>(a));
  }
  if (traj.actions.size() != n_actions)
    throw LoadError(LoadErrorKind::bad_metadata,
                    "load_dataset: action count mismatch in " + label);
  return traj;
}

}  // namespace

BufferComposition ReplayBuffer::composition() const {
  BufferComposition c;
  for (const auto& t : entries) {
    if (t.provenance == Provenance::real) {
      ++c.real_trajectories;
      c.real_pairs += static_cast<std::int64_t>(t.n_pairs());
    } else {
      ++c.pseudo_trajectories;
      c.pseudo_pairs += static_cast<std::int64_t>(t.n_pairs());
    }
  }
  return c;
}

void ReplayBuffer::teardown() {
  entries.clear();
  entries.shrink_to_fit();
}

DemoSet collect_demos(const TaskSpec& task, int m, std::uint64_t seed) {
  if (m < 1) throw std::invalid_argument("collect_demos: m must be >= 1");
  DemoSet demos;
  demos.task = task;
  demos.collection_seed = seed;
  for (int k = 0; k < m; ++k) {
    std::uint64_t episode_seed = mix_seed(seed, static_cast<std::uint64_t>(k));
    taskforge::EnvState state = taskforge::reset(task, episode_seed);
    Trajectory traj;
    traj.task_tag = task.task_id;
    traj.provenance = Provenance::real;
    traj.frames.push_back(taskforge::render(task, state));
    while (!state.done) {
      ActionId a = taskforge::expert_action(task, state);
      traj.actions.push_back(a);
      state = taskforge::step(task, state, a);
      traj.frames.push_back(taskforge::render(task, state));
    }
    if (!state.succeeded)
      throw std::runtime_error(
          "collect_demos: expert failed on task " +
          std::to_string(task.task_id) + " episode seed " +
          std::to_string(episode_seed));
    demos.trajectories.push_back(std::move(traj));
  }
  return demos;
}

ReplayBuffer buffer_prepare(const DemoSet& demos,
                            std::vector<Trajectory> pseudo) {
  if (demos.trajectories.empty())
    throw std::invalid_argument("buffer_prepare: empty demo set");
  for (const auto& t : pseudo)
    if (t.provenance != Provenance::pseudo)
      throw std::invalid_argument(
          "buffer_prepare: pseudo list contains a real trajectory");
  ReplayBuffer buffer;
  buffer.entries = demos.trajectories;
  for (auto& t : pseudo) buffer.entries.push_back(std::move(t));
  return buffer;
}

namespace {
std::vector<std::pair<const Trajectory*, std::size_t>> pair_pool(
    const ReplayBuffer& buffer) {
  std::vector<std::pair<const Trajectory*, std::size_t>> pool;
  for (const auto& t : buffer.entries)
    for (std::size_t k = 0; k < t.n_pairs(); ++k) pool.emplace_back(&t, k);
  return pool;
}
}  // namespace

std::vector<SampledPair> sample_pairs(const ReplayBuffer& buffer,
                                      int batch_size, std::uint64_t rng_seed) {
  if (batch_size < 1)
    throw std::invalid_argument("sample_pairs: batch_size must be >= 1");
  auto pool = pair_pool(buffer);
  if (pool.empty())
    throw std::invalid_argument("sample_pairs: buffer has no pairs");
  std::mt19937_64 gen(rng_seed);
  std::uniform_int_distribution<std::size_t> d(0, pool.size() - 1);
  std::vector<SampledPair> out;
  out.reserve(static_cast<std::size_t>(batch_size));
  for (int i = 0; i < batch_size; ++i) {
    auto [traj, k] = pool[d(gen)];
    out.push_back({&traj->frames[k], traj->actions[k]});
  }
  return out;
}

std::vector<SampledTransition> sample_transitions(const ReplayBuffer& buffer,
                                                  int batch_size,
                                                  std::uint64_t rng_seed) {
  if (batch_size < 1)
    throw std::invalid_argument("sample_transitions: batch_size must be >= 1");
  std::vector<std::pair<const Trajectory*, std::size_t>> pool;
  for (const auto& t : buffer.entries)
    for (std::size_t k = 0; k + 1 < t.frames.size() && k < t.actions.size(); ++k)
      pool.emplace_back(&t, k);
  if (pool.empty())
    throw std::invalid_argument("sample_transitions: buffer has no transitions");
  std::mt19937_64 gen(rng_seed);
  std::uniform_int_distribution<std::size_t> d(0, pool.size() - 1);
  std::vector<SampledTransition> out;
  out.reserve(static_cast<std::size_t>(batch_size));
  for (int i = 0; i < batch_size; ++i) {
    auto [traj, k] = pool[d(gen)];
    out.push_back({&traj->frames[k], traj->actions[k], &traj->frames[k + 1]});
  }
  return out;
}

double mean_demo_length(const DemoSet& demos) {
  double s = 0.0;
  for (const auto& t : demos.trajectories)
    s += static_cast<double>(t.actions.size());
  return s / static_cast<double>(demos.trajectories.size());
}

std::uint8_t quantize_channel(double v) {
  double q = std::round((v + 1.0) * 127.5);
  return static_cast<std::uint8_t>(std::clamp(q, 0.0, 255.0));
}

double dequantize_channel(std::uint8_t q) { return q / 127.5 - 1.0; }

Frame quantize_frame(const Frame& f) {
  Frame out;
  out.size = f.size;
  out.pixels.resize(f.pixels.size());
  for (std::size_t i = 0; i < f.pixels.size(); ++i)
    out.pixels[i] = dequantize_channel(quantize_channel(f.pixels[i]));
  return out;
}

void save_dataset(const DemoSet& demos, const std::string& root) {
  fs::path task_dir =
      fs::path(root) / ("task_" + std::to_string(demos.task.task_id));
  fs::create_directories(task_dir);
  json trajs = json::array();
  for (std::size_t k = 0; k < demos.trajectories.size(); ++k) {
    write_trajectory_dir(demos.trajectories[k],
                         task_dir / ("traj_" + std::to_string(k)));
    trajs.push_back(traj_meta_to_json(demos.trajectories[k]));
  }
  // The full task spec rides along so the round trip is self-contained.
  fs::path suite_tmp = task_dir / "task_spec.json";
  taskforge::save_suite({demos.task}, suite_tmp.string());
  json meta{{"format_version", 1},
            {"task_id", demos.task.task_id},
            {"grid_size", demos.task.grid_size},
            {"image_size", demos.task.image_size},
            {"collection_seed", demos.collection_seed},
            {"n_trajectories", demos.trajectories.size()},
            {"trajectories", trajs}};
  std::ofstream out(task_dir / "meta.json");
  out << meta.dump(2) << "\n";
}

DemoSet load_dataset(const std::string& root, int task_id) {
  fs::path task_dir = fs::path(root) / ("task_" + std::to_string(task_id));
  fs::path meta_path = task_dir / "meta.json";
  if (!fs::exists(meta_path))
    throw LoadError(LoadErrorKind::missing_metadata,
                    "load_dataset: missing meta.json under " +
                        task_dir.string());
  json meta;
  try {
    std::ifstream in(meta_path);
    meta = json::parse(in);
  } catch (const json::exception& e) {
    throw LoadError(LoadErrorKind::bad_metadata,
                    std::string("load_dataset: malformed meta.json: ") +
                        e.what());
  }
  DemoSet demos;
  try {
    demos.task = taskforge::load_suite((task_dir / "task_spec.json").string())
                     .at(0);
    demos.collection_seed = meta.at("collection_seed").get<std::uint64_t>();
    const int image_size = meta.at("image_size").get<int>();
    std::size_t n = meta.at("n_trajectories").get<std::size_t>();
    const auto& tmeta = meta.at("trajectories");
    for (std::size_t k = 0; k < n; ++k) {
      std::string label = "task_" + std::to_string(task_id) + "/traj_" +
                          std::to_string(k);
      demos.trajectories.push_back(read_trajectory_dir(
          task_dir / ("traj_" + std::to_string(k)), tmeta.at(k), image_size,
          label));
    }
  } catch (const json::exception& e) {
    throw LoadError(LoadErrorKind::bad_metadata,
                    std::string("load_dataset: malformed metadata: ") +
                        e.what());
  }
  return demos;
}

void save_pseudo(const std::vector<Trajectory>& pseudo,
                 const TaskSpec& shape_ref, const std::string& root,
                 int bundle_id) {
  fs::path dir = fs::path(root) / ("task_" + std::to_string(bundle_id));
  fs::create_directories(dir);
  json trajs = json::array();
  for (std::size_t k = 0; k < pseudo.size(); ++k) {
    write_trajectory_dir(pseudo[k], dir / ("traj_" + std::to_string(k)));
    trajs.push_back(traj_meta_to_json(pseudo[k]));
  }
  taskforge::save_suite({shape_ref}, (dir / "task_spec.json").string());
  json meta{{"format_version", 1},
            {"provenance", "pseudo"},
            {"collection_seed", 0},
            {"image_size", shape_ref.image_size},
            {"n_trajectories", pseudo.size()},
            {"trajectories", trajs}};
  std::ofstream out(dir / "meta.json");
  out << meta.dump(2) << "\n";
}

}  // namespace cilab::corpus
