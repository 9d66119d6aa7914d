#pragma once

#include <cstddef>
#include <filesystem>
#include <limits>
#include <span>
#include <vector>

#include "luxsched/energy.hpp"

namespace luxsched {

/// A per-frame light assignment and what it costs.
struct Schedule {
  std::vector<std::size_t> assignment;  // grid index per frame
  double total_energy = 0.0;
  double mean_intensity = 0.0;  // fraction in [0, 1]
  double mean_power = 0.0;      // W
};

/// Prefix energies F[t][k] and the predecessor chosen for each state.
struct TrellisState {
  static constexpr std::size_t kNoPredecessor = std::numeric_limits<std::size_t>::max();

  std::size_t frames = 0;
  std::size_t levels = 0;
  std::vector<double> prefix_energy;     // frames * levels
  std::vector<std::size_t> backpointer;  // frames * levels, row 0 holds kNoPredecessor

  double prefix(std::size_t t, std::size_t k) const { return prefix_energy[t * levels + k]; }
  std::size_t predecessor(std::size_t t, std::size_t k) const { return backpointer[t * levels + k]; }
};

/// Energy of an assignment:
///   E = sum_t U[t][k_t] + sum_t V[t][k_t][k_{t+1}],
/// accumulated frame by frame as e <- U[t][k_t] + (e + V[t-1][k_{t-1}][k_t]),
/// the same order the forward pass uses, so both agree bit-for-bit.
double evaluate_schedule(const CostTensors& costs, std::span<const std::size_t> assignment);

/// Min-sum forward pass. Ties in the inner minimum go to the lowest predecessor index.
TrellisState forward_pass(const CostTensors& costs);

/// Traces backpointers from the lowest-index minimizer of the final row.
std::vector<std::size_t> backtrack(const TrellisState& trellis);

/// Exact minimizer of the chain energy in O(T |K|^2) time and O(T |K|) memory.
///
/// Among equal-energy optima the result is the one picked by choosing the lowest
/// level index at every minimum while walking back from the last frame. Throws
/// NumericalError on non-finite costs.
Schedule solve_ois(const CostTensors& costs, const PowerModel& power = {});

inline constexpr std::size_t kBruteForceLimit = 10'000'000;

/// Exhaustive minimum over all |K|^T assignments with the same tie-break as
/// solve_ois. Throws InstanceTooLargeError above kBruteForceLimit assignments.
Schedule brute_force_ois(const CostTensors& costs, const PowerModel& power = {});

/// Fills total_energy, mean_intensity and mean_power for an assignment.
Schedule make_schedule(const CostTensors& costs, std::vector<std::size_t> assignment,
                       const PowerModel& power = {});

namespace schedule_io {

struct CsvRow {
  std::size_t frame = 0;
  std::size_t intensity_index = 0;
  double intensity = 0.0;
  double unary = 0.0;
  double pairwise_to_next = 0.0;
};

/// frame,intensity_index,intensity,unary,pairwise_to_next (last frame has 0).
void write_csv(const std::filesystem::path& path, const CostTensors& costs, const Schedule& schedule);
std::vector<CsvRow> read_csv(const std::filesystem::path& path);
/// Grid indices from a schedule CSV.
std::vector<std::size_t> read_assignment(const std::filesystem::path& path);

/// {total_energy, mean_intensity, mean_power_watts}
void write_summary(const std::filesystem::path& path, const Schedule& schedule);

}  // namespace schedule_io

}  // namespace luxsched
