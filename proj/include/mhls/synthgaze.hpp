#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mhls/dataset.hpp"

namespace mhls {

inline constexpr std::size_t kLanes = 3;
inline constexpr double kScreenWidth = 1920.0;
inline constexpr double kScreenHeight = 1080.0;
inline constexpr double kSampleRate = 60.0;

/// Lane probabilities exp(c_i / interval) / sum_j exp(c_j / interval), where
/// c_i is the free distance ahead in lane i. Throws std::invalid_argument for
/// a non-positive interval or negative gaps.
std::array<double, kLanes> place_obstacles(std::span<const double> gaps, double interval_size);

/// One lane drawn from place_obstacles(gaps, interval_size).
std::size_t draw_lane(std::span<const double> gaps, double interval_size, std::mt19937_64& rng);

struct Obstacle {
  double position = 0.0;  // distance along the road
  std::size_t lane = 0;
  int digit = 0;
};

/// Obstacles at a regular interval; each lane is drawn from place_obstacles
/// over the per-lane distances since that lane's last obstacle.
std::vector<Obstacle> obstacle_timeline(double interval_size, double length, std::mt19937_64& rng);

struct ScenarioConfig {
  double interval_size = 50.0;  // m
  double duration = 60.0;       // s
  double speed_min = 120.0 / 3.6;
  double speed_max = 130.0 / 3.6;
  int workload = 0;  // 0 = 0-back (low), 1 = 1-back (high)
};

/// Knobs shared by every participant.
struct GeneratorKnobs {
  double dwell_low = 0.3;         // mean fixation duration, s
  double dwell_high = 0.5;
  double dwell_shape = 4.0;       // gamma shape of fixation durations
  double dispersion_ratio = 1.5;  // low-workload spread / high-workload spread
  double separation = 1.0;        // 0 makes both workload levels identical
  double fixation_scatter = 60.0; // px, landing error around a target
  double jitter = 5.0;            // px, within-fixation drift
  double effect_size = 0.25;      // expected relative dispersion difference
  double trial_duration = 60.0;   // s
  double interval_size = 50.0;    // m

  /// Throws std::invalid_argument naming the offending knob.
  void validate() const;
};

struct WorkloadParams {
  double dwell_mean = 0.3;
  double dwell_shape = 4.0;
  double spread = 1.0;  // scale of the spatial pattern about the gaze center
};

struct ParticipantProfile {
  std::uint64_t seed = 0;
  double center_x = kScreenWidth / 2;  // road vanishing point as seen by this participant
  double center_y = kScreenHeight * 0.4;
  double scatter = 60.0;
  double jitter = 5.0;
  double saccade_speed = 10000.0;  // px/s
  std::array<double, 4> target_weights{0.4, 0.3, 0.15, 0.15};  // center, obstacle, left, right edge
  WorkloadParams low;
  WorkloadParams high;

  const WorkloadParams& workload(int level) const { return level ? high : low; }
};

/// Participant profile drawn deterministically from (master seed, id).
ParticipantProfile make_profile(const GeneratorKnobs& knobs, std::uint64_t master_seed,
                                int participant);

/// 60 Hz fixation/saccade renewal process over an obstacle timeline.
/// Deterministic given (profile, scenario, seed).
std::vector<GazeSample> simulate_trial(const ParticipantProfile& profile,
                                       const ScenarioConfig& scenario, std::uint64_t seed,
                                       int participant = 0);

/// Root-mean-square distance of the samples from their centroid.
double gaze_dispersion(std::span<const GazeSample> samples);

struct GeneratedTrial {
  Trial trial;
  std::uint64_t seed = 0;
  std::size_t repeat = 0;
};

/// Both workload conditions for each of n participants, `repeats` trials each.
std::vector<GeneratedTrial> generate_trials(const GeneratorKnobs& knobs, std::size_t participants,
                                            std::size_t repeats, std::uint64_t master_seed);

/// Writes one raw gaze file per trial plus manifest.txt recording seeds and
/// knobs. Returns the trial file paths in write order.
std::vector<std::filesystem::path> write_generated(const std::filesystem::path& dir,
                                                   const GeneratorKnobs& knobs,
                                                   std::span<const GeneratedTrial> trials,
                                                   std::uint64_t master_seed);

}  // namespace mhls
