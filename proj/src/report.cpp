// Report emission for completed runs: forgetting curves, success-rate bars,
// pseudo-sample montages, and omega tables. CSVs are the ground truth; the
// SVG plots are rendered from the very same aggregated numbers.
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include "cilab/cli.hpp"
#include "cilab/png_io.hpp"

namespace cilab::cli {

namespace fs = std::filesystem;

namespace {

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;
  int n = 0;
};

MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd r;
  r.n = static_cast<int>(xs.size());
  if (r.n == 0) return r;
  for (double x : xs) r.mean += x;
  r.mean /= r.n;
  for (double x : xs) r.stddev += (x - r.mean) * (x - r.mean);
  r.stddev = std::sqrt(r.stddev / r.n);  // population std over the seeds
  return r;
}

std::string fmt(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(6) << v;
  return s.str();
}

std::string fmt3(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(3) << v;
  return s.str();
}

// Per-method display colors for the SVG plots.
std::string method_color(replay::StrategyKind k) {
  switch (k) {
    case replay::StrategyKind::finetune: return "#d62728";
    case replay::StrategyKind::rehearsal: return "#2ca02c";
    case replay::StrategyKind::original_dgr: return "#ff7f0e";
    case replay::StrategyKind::trajectory_dgr: return "#9467bd";
    case replay::StrategyKind::cril: return "#1f77b4";
  }
  return "#000000";
}

// Maps (x in [1, n], y in [0, 1]) to SVG pixel coordinates.
struct PlotFrame {
  double width = 640, height = 420;
  double left = 60, right = 20, top = 30, bottom = 50;
  int n = 1;

  double x(double task) const {
    double span = width - left - right;
    return n == 1 ? left + span / 2
                  : left + span * (task - 1) / static_cast<double>(n - 1);
  }
  double y(double v) const {
    return top + (height - top - bottom) * (1.0 - v);
  }
};

void svg_header(std::ostream& out, const PlotFrame& f, const std::string& title,
                const std::string& x_label, const std::string& y_label) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << f.width
      << "\" height=\"" << f.height << "\" font-family=\"sans-serif\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << f.width / 2 << "\" y=\"18\" text-anchor=\"middle\" "
      << "font-size=\"14\">" << title << "</text>\n";
  // Axes and y gridlines at 0, 0.25, ..., 1.
  for (int i = 0; i <= 4; ++i) {
    double v = i / 4.0;
    out << "<line x1=\"" << f.left << "\" y1=\"" << f.y(v) << "\" x2=\""
        << f.width - f.right << "\" y2=\"" << f.y(v)
        << "\" stroke=\"#dddddd\"/>\n";
    out << "<text x=\"" << f.left - 8 << "\" y=\"" << f.y(v) + 4
        << "\" text-anchor=\"end\" font-size=\"11\">" << fmt3(v)
        << "</text>\n";
  }
  out << "<line x1=\"" << f.left << "\" y1=\"" << f.y(0) << "\" x2=\""
      << f.width - f.right << "\" y2=\"" << f.y(0)
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << f.left << "\" y1=\"" << f.y(1) - 6 << "\" x2=\""
      << f.left << "\" y2=\"" << f.y(0) << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << (f.left + f.width - f.right) / 2 << "\" y=\""
      << f.height - 12 << "\" text-anchor=\"middle\" font-size=\"12\">"
      << x_label << "</text>\n";
  out << "<text x=\"16\" y=\"" << f.height / 2
      << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 "
      << 16 << " " << f.height / 2 << ")\">" << y_label << "</text>\n";
}

void svg_legend(std::ostream& out, const PlotFrame& f,
                const std::vector<replay::StrategyKind>& methods) {
  double y = f.top + 6;
  for (auto k : methods) {
    out << "<rect x=\"" << f.width - f.right - 150 << "\" y=\"" << y - 9
        << "\" width=\"12\" height=\"12\" fill=\"" << method_color(k)
        << "\"/>\n";
    out << "<text x=\"" << f.width - f.right - 134 << "\" y=\"" << y + 2
        << "\" font-size=\"11\">" << replay::to_string(k) << "</text>\n";
    y += 16;
  }
}

}  // namespace

RunSummary load_run_summary(const std::string& run_dir) {
  fs::path dir(run_dir);
  if (!fs::exists(dir / "config.json"))
    throw std::runtime_error("load_run_summary: missing " +
                             (dir / "config.json").string());
  if (!fs::exists(dir / "record.csv"))
    throw std::runtime_error("load_run_summary: missing " +
                             (dir / "record.csv").string());
  loop::TrainConfig cfg =
      loop::load_config_json((dir / "config.json").string());

  std::ifstream in(dir / "record.csv");
  std::string line;
  if (!std::getline(in, line) ||
      line != "after_task,eval_task,accuracy,success_rate")
    throw std::runtime_error("load_run_summary: bad record.csv header in " +
                             run_dir);
  std::map<std::pair<int, int>, std::pair<double, double>> cells;
  int n = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    int i = 0, j = 0;
    double acc = 0, succ = 0;
    char comma = 0;
    if (!(row >> i >> comma >> j >> comma >> acc >> comma >> succ))
      throw std::runtime_error("load_run_summary: malformed row '" + line +
                               "' in " + run_dir);
    cells[{i, j}] = {acc, succ};
    n = std::max(n, i);
  }
  if (n == 0)
    throw std::runtime_error("load_run_summary: record.csv has no rows in " +
                             run_dir);

  RunSummary summary;
  summary.strategy = cfg.strategy;
  summary.seed = cfg.seed;
  summary.dir = run_dir;
  for (int i = 1; i <= n; ++i) {
    std::vector<double> acc_row, succ_row;
    for (int j = 1; j <= i; ++j) {
      auto it = cells.find({i, j});
      if (it == cells.end())
        throw std::runtime_error(
            "load_run_summary: incomplete record in " + run_dir +
            ": missing cell (after_task=" + std::to_string(i) +
            ", eval_task=" + std::to_string(j) + ")");
      acc_row.push_back(it->second.first);
      succ_row.push_back(it->second.second);
    }
    summary.matrix.append_row(acc_row);
    summary.success.push_back(succ_row);
  }
  return summary;
}

int cmd_report(const std::vector<std::string>& run_dirs,
               const std::string& out_dir, std::ostream& out,
               std::ostream& err) {
  if (run_dirs.empty()) {
    err << "report: at least one run directory is required\n";
    return kExitUsage;
  }
  std::vector<RunSummary> runs;
  try {
    for (const auto& dir : run_dirs) runs.push_back(load_run_summary(dir));
  } catch (const std::exception& e) {
    err << "report: " << e.what() << "\n";
    return kExitRuntime;
  }

  try {
    const int n = runs.front().matrix.n();
    for (const auto& r : runs)
      if (r.matrix.n() != n)
        throw std::runtime_error(
            "report: runs cover different task counts (" + std::to_string(n) +
            " vs " + std::to_string(r.matrix.n()) + " in " + r.dir + ")");

    fs::create_directories(out_dir);
    fs::path root(out_dir);

    // Stable method order: strategy enumeration order, methods present only.
    std::vector<replay::StrategyKind> methods;
    for (auto k : replay::kAllStrategies)
      for (const auto& r : runs)
        if (r.strategy == k) {
          methods.push_back(k);
          break;
        }

    // --- Forgetting curves: mean accuracy over learned tasks vs task index,
    // aggregated across seeds per method.
    struct Curve {
      std::vector<MeanStd> points;  // index i-1 = after task i
    };
    std::map<replay::StrategyKind, Curve> curves;
    for (auto k : methods) {
      Curve c;
      for (int i = 1; i <= n; ++i) {
        std::vector<double> vals;
        for (const auto& r : runs) {
          if (r.strategy != k) continue;
          double mean = 0.0;
          for (int j = 1; j <= i; ++j) mean += r.matrix.at(i, j);
          vals.push_back(mean / i);
        }
        c.points.push_back(mean_std(vals));
      }
      curves[k] = c;
    }
    {
      std::ofstream csv(root / "forgetting_curves.csv");
      csv << "method,after_task,mean_accuracy,std_accuracy,n_seeds\n";
      for (auto k : methods)
        for (int i = 1; i <= n; ++i) {
          const MeanStd& p = curves[k].points[static_cast<std::size_t>(i - 1)];
          csv << replay::to_string(k) << "," << i << "," << fmt(p.mean) << ","
              << fmt(p.stddev) << "," << p.n << "\n";
        }
    }
    {
      std::ofstream svg(root / "forgetting_curves.svg");
      PlotFrame f;
      f.n = n;
      svg_header(svg, f, "Mean accuracy over learned tasks", "tasks learned",
                 "accuracy");
      for (int i = 1; i <= n; ++i)
        svg << "<text x=\"" << f.x(i) << "\" y=\"" << f.y(0) + 16
            << "\" text-anchor=\"middle\" font-size=\"11\">" << i
            << "</text>\n";
      for (auto k : methods) {
        const auto& pts = curves[k].points;
        // Std band first so the mean line draws on top.
        std::ostringstream band;
        for (int i = 1; i <= n; ++i)
          band << f.x(i) << ","
               << f.y(std::min(1.0, pts[static_cast<std::size_t>(i - 1)].mean +
                                         pts[static_cast<std::size_t>(i - 1)]
                                             .stddev))
               << " ";
        for (int i = n; i >= 1; --i)
          band << f.x(i) << ","
               << f.y(std::max(0.0, pts[static_cast<std::size_t>(i - 1)].mean -
                                         pts[static_cast<std::size_t>(i - 1)]
                                             .stddev))
               << " ";
        svg << "<polygon points=\"" << band.str() << "\" fill=\""
            << method_color(k) << "\" fill-opacity=\"0.15\"/>\n";
        std::ostringstream line;
        for (int i = 1; i <= n; ++i)
          line << f.x(i) << ","
               << f.y(pts[static_cast<std::size_t>(i - 1)].mean) << " ";
        svg << "<polyline points=\"" << line.str()
            << "\" fill=\"none\" stroke=\"" << method_color(k)
            << "\" stroke-width=\"2\"/>\n";
      }
      svg_legend(svg, f, methods);
      svg << "</svg>\n";
    }

    // --- Success-rate bars: final-row success per task, per method.
    std::map<replay::StrategyKind, std::vector<MeanStd>> bars;
    for (auto k : methods) {
      std::vector<MeanStd> per_task;
      for (int j = 1; j <= n; ++j) {
        std::vector<double> vals;
        for (const auto& r : runs)
          if (r.strategy == k)
            vals.push_back(r.success[static_cast<std::size_t>(n - 1)]
                                    [static_cast<std::size_t>(j - 1)]);
        per_task.push_back(mean_std(vals));
      }
      bars[k] = per_task;
    }
    {
      std::ofstream csv(root / "success_rates.csv");
      csv << "method,task,mean_success,std_success,n_seeds\n";
      for (auto k : methods)
        for (int j = 1; j <= n; ++j) {
          const MeanStd& b = bars[k][static_cast<std::size_t>(j - 1)];
          csv << replay::to_string(k) << "," << j << "," << fmt(b.mean) << ","
              << fmt(b.stddev) << "," << b.n << "\n";
        }
    }
    {
      std::ofstream svg(root / "success_rates.svg");
      PlotFrame f;
      f.n = n;
      svg_header(svg, f, "Success rate per task after the final task", "task",
                 "success rate");
      const double span = f.width - f.left - f.right;
      const double group_w = span / n;
      const double bar_w =
          group_w * 0.8 / static_cast<double>(methods.size());
      for (int j = 1; j <= n; ++j) {
        double group_x = f.left + group_w * (j - 1) + group_w * 0.1;
        for (std::size_t mi = 0; mi < methods.size(); ++mi) {
          const MeanStd& b = bars[methods[mi]][static_cast<std::size_t>(j - 1)];
          double x = group_x + bar_w * static_cast<double>(mi);
          svg << "<rect x=\"" << x << "\" y=\"" << f.y(b.mean)
              << "\" width=\"" << bar_w * 0.9 << "\" height=\""
              << f.y(0) - f.y(b.mean) << "\" fill=\""
              << method_color(methods[mi]) << "\"/>\n";
          // Std whisker.
          double cx = x + bar_w * 0.45;
          svg << "<line x1=\"" << cx << "\" y1=\""
              << f.y(std::max(0.0, b.mean - b.stddev)) << "\" x2=\"" << cx
              << "\" y2=\"" << f.y(std::min(1.0, b.mean + b.stddev))
              << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
        }
        svg << "<text x=\"" << f.left + group_w * (j - 0.5) << "\" y=\""
            << f.y(0) + 16 << "\" text-anchor=\"middle\" font-size=\"11\">"
            << j << "</text>\n";
      }
      svg_legend(svg, f, methods);
      svg << "</svg>\n";
    }

    // --- Omega table: per run, plus per-method aggregate (needs n >= 2).
    {
      std::ofstream csv(root / "omega.csv");
      csv << "method,seed,omega_base,omega_new,omega_all\n";
      std::ofstream md(root / "omega.md");
      md << "| method | omega_base | omega_new | omega_all | seeds |\n";
      md << "|---|---|---|---|---|\n";
      for (auto k : methods) {
        std::vector<double> base, neu, all;
        for (const auto& r : runs) {
          if (r.strategy != k || r.matrix.n() < 2) continue;
          auto s = evalkit::omega_scores(r.matrix);
          csv << replay::to_string(k) << "," << r.seed << ","
              << fmt(s.omega_base) << "," << fmt(s.omega_new) << ","
              << fmt(s.omega_all) << "\n";
          base.push_back(s.omega_base);
          neu.push_back(s.omega_new);
          all.push_back(s.omega_all);
        }
        if (base.empty()) continue;
        MeanStd b = mean_std(base), w = mean_std(neu), a = mean_std(all);
        md << "| " << replay::to_string(k) << " | " << fmt3(b.mean) << " ± "
           << fmt3(b.stddev) << " | " << fmt3(w.mean) << " ± "
           << fmt3(w.stddev) << " | " << fmt3(a.mean) << " ± "
           << fmt3(a.stddev) << " | " << b.n << " |\n";
      }
    }

    // --- Pseudo-sample montages: tile each dumped trajectory as one row of
    // frames, tasks stacked, one montage per run that has dumps.
    int montages = 0;
    for (const auto& r : runs) {
      fs::path pseudo_dir = fs::path(r.dir) / "pseudo_samples";
      if (!fs::exists(pseudo_dir)) continue;
      std::vector<std::vector<pngio::Image8>> rows;
      std::vector<fs::path> task_dirs;
      for (const auto& e : fs::directory_iterator(pseudo_dir))
        if (e.is_directory()) task_dirs.push_back(e.path());
      std::sort(task_dirs.begin(), task_dirs.end());
      for (const auto& task_dir : task_dirs) {
        std::vector<fs::path> traj_dirs;
        for (const auto& e : fs::directory_iterator(task_dir))
          if (e.is_directory()) traj_dirs.push_back(e.path());
        std::sort(traj_dirs.begin(), traj_dirs.end());
        for (const auto& traj_dir : traj_dirs) {
          std::vector<fs::path> frames;
          for (const auto& e : fs::directory_iterator(traj_dir))
            if (e.path().extension() == ".png") frames.push_back(e.path());
          std::sort(frames.begin(), frames.end());
          std::vector<pngio::Image8> row;
          for (const auto& p : frames)
            row.push_back(pngio::read_png(p.string()));
          if (!row.empty()) rows.push_back(std::move(row));
        }
      }
      if (rows.empty()) continue;
      const int cell = rows[0][0].width;
      std::size_t max_cols = 0;
      for (const auto& row : rows) max_cols = std::max(max_cols, row.size());
      const int pad = 1;
      pngio::Image8 montage;
      montage.width = static_cast<int>(max_cols) * (cell + pad) + pad;
      montage.height = static_cast<int>(rows.size()) * (cell + pad) + pad;
      montage.rgb.assign(
          static_cast<std::size_t>(montage.width) * montage.height * 3, 255);
      for (std::size_t ri = 0; ri < rows.size(); ++ri)
        for (std::size_t ci = 0; ci < rows[ri].size(); ++ci) {
          const pngio::Image8& tile = rows[ri][ci];
          int y0 = pad + static_cast<int>(ri) * (cell + pad);
          int x0 = pad + static_cast<int>(ci) * (cell + pad);
          for (int y = 0; y < tile.height; ++y)
            for (int x = 0; x < tile.width; ++x)
              for (int c = 0; c < 3; ++c)
                montage.rgb[(static_cast<std::size_t>(y0 + y) * montage.width +
                             (x0 + x)) *
                                3 +
                            c] =
                    tile.rgb[(static_cast<std::size_t>(y) * tile.width + x) *
                                 3 +
                             c];
        }
      std::string name = "pseudo_" + replay::to_string(r.strategy) + "_seed" +
                         std::to_string(r.seed) + ".png";
      pngio::write_png((root / name).string(), montage);
      ++montages;
    }

    out << "report: " << runs.size() << " runs, " << methods.size()
        << " methods, " << n << " tasks; wrote forgetting_curves.{csv,svg}, "
        << "success_rates.{csv,svg}, omega.{csv,md}, " << montages
        << " montage(s) to " << out_dir << "\n";
  } catch (const std::exception& e) {
    err << "report: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace cilab::cli
