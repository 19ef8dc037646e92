#include "mhls/synthgaze.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace mhls {

namespace {

constexpr double kDepthScale = 20.0;    // m, perspective falloff of the road
constexpr double kRoadDrop = 420.0;     // px below the vanishing point at depth 0
constexpr double kLaneSpacing = 350.0;  // px between lane centers at depth 0
constexpr double kEdgeOffset = 600.0;   // px from center to a road edge at depth 0
constexpr double kPassedMargin = 5.0;   // m, obstacles closer than this are no longer looked at

std::mt19937_64 derived_rng(std::initializer_list<std::uint32_t> words) {
  std::seed_seq seq(words);
  return std::mt19937_64(seq);
}

std::uint32_t lo32(std::uint64_t v) { return static_cast<std::uint32_t>(v); }
std::uint32_t hi32(std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); }

struct Point {
  double x = 0.0;
  double y = 0.0;
};

double perspective(double depth) { return kDepthScale / (std::max(depth, 0.0) + kDepthScale); }

class GazeTargets {
 public:
  GazeTargets(const ParticipantProfile& profile, std::vector<Obstacle> obstacles, double speed)
      : profile_(profile), obstacles_(std::move(obstacles)), speed_(speed) {}

  Point pick(double t, std::mt19937_64& rng) {
    std::discrete_distribution<int> which(profile_.target_weights.begin(),
                                          profile_.target_weights.end());
    const Point center{profile_.center_x, profile_.center_y};
    const int choice = which(rng);
    switch (choice) {
      case 1: {
        const double travelled = speed_ * t;
        while (next_ < obstacles_.size() &&
               obstacles_[next_].position - travelled <= kPassedMargin) {
          ++next_;
        }
        if (next_ == obstacles_.size()) return center;
        const Obstacle& o = obstacles_[next_];
        const double s = perspective(o.position - travelled);
        const double lane = static_cast<double>(o.lane) - 1.0;
        return {center.x + lane * kLaneSpacing * s, center.y + kRoadDrop * s};
      }
      case 2:
      case 3: {
        std::uniform_real_distribution<double> depth(5.0, 60.0);
        const double s = perspective(depth(rng));
        const double side = choice == 2 ? -1.0 : 1.0;
        return {center.x + side * kEdgeOffset * s, center.y + kRoadDrop * s};
      }
      default:
        return center;
    }
  }

 private:
  const ParticipantProfile& profile_;
  std::vector<Obstacle> obstacles_;
  double speed_;
  std::size_t next_ = 0;
};

}  // namespace

std::array<double, kLanes> place_obstacles(std::span<const double> gaps, double interval_size) {
  if (gaps.size() != kLanes) throw std::invalid_argument("place_obstacles: expected 3 gaps");
  if (!(interval_size > 0.0)) throw std::invalid_argument("place_obstacles: interval must be positive");
  for (double c : gaps) {
    if (!(c >= 0.0) || !std::isfinite(c)) {
      throw std::invalid_argument("place_obstacles: gaps must be finite and non-negative");
    }
  }
  const double top = *std::max_element(gaps.begin(), gaps.end());
  std::array<double, kLanes> p{};
  double total = 0.0;
  for (std::size_t i = 0; i < kLanes; ++i) {
    p[i] = std::exp((gaps[i] - top) / interval_size);
    total += p[i];
  }
  for (double& v : p) v /= total;
  return p;
}

std::size_t draw_lane(std::span<const double> gaps, double interval_size, std::mt19937_64& rng) {
  const auto p = place_obstacles(gaps, interval_size);
  std::discrete_distribution<std::size_t> lane_dist(p.begin(), p.end());
  return lane_dist(rng);
}

std::vector<Obstacle> obstacle_timeline(double interval_size, double length, std::mt19937_64& rng) {
  std::vector<Obstacle> out;
  std::array<double, kLanes> gaps{};
  std::uniform_int_distribution<int> digit(0, 9);
  for (double pos = interval_size; pos <= length; pos += interval_size) {
    const std::size_t lane = draw_lane(gaps, interval_size, rng);
    out.push_back({pos, lane, digit(rng)});
    for (std::size_t i = 0; i < kLanes; ++i) gaps[i] = i == lane ? 0.0 : gaps[i] + interval_size;
  }
  return out;
}

void GeneratorKnobs::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument(std::string("generator knob ") + name + " must be positive");
    }
  };
  positive(dwell_low, "dwell_low");
  positive(dwell_high, "dwell_high");
  positive(dwell_shape, "dwell_shape");
  positive(dispersion_ratio, "dispersion_ratio");
  positive(fixation_scatter, "fixation_scatter");
  positive(jitter, "jitter");
  positive(trial_duration, "trial_duration");
  positive(interval_size, "interval_size");
  if (!(separation >= 0.0)) throw std::invalid_argument("generator knob separation must be >= 0");
  if (!(effect_size >= 0.0)) throw std::invalid_argument("generator knob effect_size must be >= 0");
}

ParticipantProfile make_profile(const GeneratorKnobs& knobs, std::uint64_t master_seed,
                                int participant) {
  knobs.validate();
  auto rng = derived_rng({lo32(master_seed), hi32(master_seed),
                          static_cast<std::uint32_t>(participant), 0x9a7eu});
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::gamma_distribution<double> weight(2.0, 1.0);

  ParticipantProfile p;
  p.seed = rng();
  p.center_x = kScreenWidth / 2 + 80.0 * normal(rng);
  p.center_y = kScreenHeight * 0.4 + 50.0 * normal(rng);
  p.scatter = knobs.fixation_scatter * std::exp(0.2 * normal(rng));
  p.jitter = knobs.jitter * (0.7 + 0.6 * unit(rng));
  p.saccade_speed = 8000.0 + 4000.0 * unit(rng);
  double total = 0.0;
  for (double& w : p.target_weights) total += (w = weight(rng));
  for (double& w : p.target_weights) w /= total;

  const double dwell_factor = std::exp(0.15 * normal(rng));
  const double s = knobs.separation;
  p.low = {knobs.dwell_low * dwell_factor, knobs.dwell_shape, 1.0};
  p.high = {(knobs.dwell_low + s * (knobs.dwell_high - knobs.dwell_low)) * dwell_factor,
            knobs.dwell_shape, 1.0 / (1.0 + s * (knobs.dispersion_ratio - 1.0))};
  return p;
}

std::vector<GazeSample> simulate_trial(const ParticipantProfile& profile,
                                       const ScenarioConfig& scenario, std::uint64_t seed,
                                       int participant) {
  if (!(scenario.duration > 0.0)) throw std::invalid_argument("trial duration must be positive");
  auto rng = derived_rng({lo32(seed), hi32(seed), 0x7a1au});
  std::uniform_real_distribution<double> speed_dist(scenario.speed_min, scenario.speed_max);
  const double speed = speed_dist(rng);
  auto obstacles = obstacle_timeline(scenario.interval_size,
                                     scenario.duration * speed + 10 * scenario.interval_size, rng);
  GazeTargets targets(profile, std::move(obstacles), speed);

  const WorkloadParams& w = profile.workload(scenario.workload);
  std::gamma_distribution<double> dwell(w.dwell_shape, w.dwell_mean / w.dwell_shape);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Point center{profile.center_x, profile.center_y};

  auto fixation_point = [&](double t) {
    const Point target = targets.pick(t, rng);
    Point p{target.x + profile.scatter * normal(rng), target.y + profile.scatter * normal(rng)};
    p.x = std::clamp(center.x + (p.x - center.x) * w.spread, 0.0, kScreenWidth);
    p.y = std::clamp(center.y + (p.y - center.y) * w.spread, 0.0, kScreenHeight);
    return p;
  };

  const auto n = static_cast<std::size_t>(std::floor(scenario.duration * kSampleRate));
  std::vector<GazeSample> out;
  out.reserve(n);
  Point fixation = fixation_point(0.0);
  Point from = fixation;
  double fixation_end = std::max(0.05, dwell(rng));
  double saccade_start = 0.0;
  double saccade_end = -1.0;
  Point drift{};
  const double keep = 0.8;
  const double innovation = profile.jitter * std::sqrt(1.0 - keep * keep);

  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) / kSampleRate;
    Point pos;
    if (t < saccade_end) {
      const double u = (t - saccade_start) / (saccade_end - saccade_start);
      const double s = u * u * (3.0 - 2.0 * u);
      pos = {from.x + s * (fixation.x - from.x), from.y + s * (fixation.y - from.y)};
    } else {
      if (saccade_end >= 0.0) {
        fixation_end = t + std::max(0.05, dwell(rng));
        saccade_end = -1.0;
      }
      if (t >= fixation_end) {
        from = {fixation.x + drift.x, fixation.y + drift.y};
        fixation = fixation_point(t);
        const double amplitude = std::hypot(fixation.x - from.x, fixation.y - from.y);
        saccade_start = t;
        saccade_end = t + std::max(1.0 / kSampleRate, amplitude / profile.saccade_speed);
        drift = {};
        pos = from;
      } else {
        drift.x = keep * drift.x + innovation * normal(rng);
        drift.y = keep * drift.y + innovation * normal(rng);
        pos = {fixation.x + drift.x, fixation.y + drift.y};
      }
    }
    out.push_back({t, pos.x, pos.y, participant, scenario.workload});
  }
  return out;
}

double gaze_dispersion(std::span<const GazeSample> samples) {
  if (samples.empty()) throw GazeError("gaze_dispersion: no samples");
  double mx = 0.0, my = 0.0;
  for (const GazeSample& s : samples) {
    mx += s.x;
    my += s.y;
  }
  const double n = static_cast<double>(samples.size());
  mx /= n;
  my /= n;
  double ss = 0.0;
  for (const GazeSample& s : samples) ss += (s.x - mx) * (s.x - mx) + (s.y - my) * (s.y - my);
  return std::sqrt(ss / n);
}

std::vector<GeneratedTrial> generate_trials(const GeneratorKnobs& knobs, std::size_t participants,
                                            std::size_t repeats, std::uint64_t master_seed) {
  knobs.validate();
  if (participants == 0 || repeats == 0) {
    throw std::invalid_argument("need at least one participant and one trial per condition");
  }
  std::vector<GeneratedTrial> out;
  for (std::size_t p = 0; p < participants; ++p) {
    const int id = static_cast<int>(p) + 1;
    const ParticipantProfile profile = make_profile(knobs, master_seed, id);
    for (int level = 0; level <= 1; ++level) {
      for (std::size_t r = 0; r < repeats; ++r) {
        auto seeder = derived_rng({lo32(master_seed), hi32(master_seed), static_cast<std::uint32_t>(id),
                                   static_cast<std::uint32_t>(level), static_cast<std::uint32_t>(r)});
        const std::uint64_t seed = seeder();
        ScenarioConfig scenario;
        scenario.interval_size = knobs.interval_size;
        scenario.duration = knobs.trial_duration;
        scenario.workload = level;
        GeneratedTrial g;
        g.trial = {id, level, simulate_trial(profile, scenario, seed, id)};
        g.seed = seed;
        g.repeat = r;
        out.push_back(std::move(g));
      }
    }
  }
  return out;
}

std::vector<std::filesystem::path> write_generated(const std::filesystem::path& dir,
                                                   const GeneratorKnobs& knobs,
                                                   std::span<const GeneratedTrial> trials,
                                                   std::uint64_t master_seed) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> paths;
  std::ofstream manifest(dir / "manifest.txt", std::ios::trunc);
  if (!manifest) throw std::runtime_error("cannot write " + (dir / "manifest.txt").string());
  manifest << "master_seed=" << master_seed << '\n'
           << "dwell_low=" << format_double(knobs.dwell_low) << '\n'
           << "dwell_high=" << format_double(knobs.dwell_high) << '\n'
           << "dwell_shape=" << format_double(knobs.dwell_shape) << '\n'
           << "dispersion_ratio=" << format_double(knobs.dispersion_ratio) << '\n'
           << "separation=" << format_double(knobs.separation) << '\n'
           << "fixation_scatter=" << format_double(knobs.fixation_scatter) << '\n'
           << "jitter=" << format_double(knobs.jitter) << '\n'
           << "effect_size=" << format_double(knobs.effect_size) << '\n'
           << "trial_duration=" << format_double(knobs.trial_duration) << '\n'
           << "interval_size=" << format_double(knobs.interval_size) << '\n';
  for (const GeneratedTrial& g : trials) {
    char name[64];
    std::snprintf(name, sizeof name, "p%03d_s%d_r%02zu.csv", g.trial.participant,
                  g.trial.scenario, g.repeat);
    const std::filesystem::path path = dir / name;
    write_gaze_csv(path, std::span<const Trial>(&g.trial, 1));
    manifest << "trial=" << name << " participant=" << g.trial.participant
             << " scenario=" << g.trial.scenario << " seed=" << g.seed << '\n';
    paths.push_back(path);
  }
  if (!manifest) throw std::runtime_error("write failed for manifest.txt");
  return paths;
}

}  // namespace mhls
