#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <Eigen/Dense>

#include "senskit/grid.hpp"
#include "senskit/profiles.hpp"
#include "senskit/rng.hpp"

namespace senskit {

/// Instrument-transformer accuracy class. Magnitude errors are fractions
/// (0.5 % -> 0.005), phase errors radians; both are 3-sigma limits.
struct ITClass {
    std::string name = "ideal";
    double sigma_m_v = 0.0;
    double sigma_p_v = 0.0;
    double sigma_m_i = 0.0;
    double sigma_p_i = 0.0;

    static ITClass ideal() { return {}; }
    static ITClass class_02() { return {"0.2", 0.002, 3e-3, 0.002, 3e-3}; }
    static ITClass class_05() { return {"0.5", 0.005, 6e-3, 0.005, 9e-3}; }
    static ITClass class_10() { return {"1.0", 0.01, 12e-3, 0.01, 18e-3}; }

    /// Accepts "ideal", "0.2", "0.5", "1.0" (and "1").
    static ITClass by_name(const std::string& name);

    bool operator==(const ITClass&) const = default;
};

struct NoisyPhasors {
    Complex v;
    Complex i;
    int clamped = 0;  // magnitudes that went non-positive and were clamped
};

/// Noise slots within one timestep: bus b (1-based) voltage magnitude and
/// angle use 2(b-1), 2(b-1)+1; its current uses 2m + 2(b-1), 2m + 2(b-1)+1.
struct NoiseSlots {
    std::uint64_t v_mag, v_ang, i_mag, i_ang;
    static NoiseSlots for_bus(int bus, int n_pq);
};

/// Perturbs magnitude by N(0, sigma_m |beta| / 3) and angle by
/// N(0, sigma_p / 3) for beta in {v, i}. Draws are keyed on (step, slot).
NoisyPhasors inject_noise(Complex v, Complex i, const ITClass& cls, const CounterRng& rng, std::uint64_t step,
                          const NoiseSlots& slots);

/// Time-indexed noisy measurements at the non-slack buses, per-unit.
/// Row k is timestamp t0 + k seconds.
struct MeasurementSeries {
    int t0 = 0;
    Eigen::MatrixXd v_mag;
    Eigen::MatrixXd p;
    Eigen::MatrixXd q;
    ITClass it_class;
    std::uint64_t seed = 0;
    std::uint64_t grid_hash = 0;
    int clamped = 0;

    int steps() const { return static_cast<int>(v_mag.rows()); }
    int n_pq() const { return static_cast<int>(v_mag.cols()); }
    int t_end() const { return t0 + steps(); }  // exclusive

    bool operator==(const MeasurementSeries& o) const;
};

/// Load flow per timestep, noise on every nodal voltage and injected
/// current, then P + jQ = V I*. Timesteps run in parallel; the output is
/// independent of the schedule.
MeasurementSeries simulate_measurements(const GridModel& grid, const ProfileSet& profiles, const ITClass& cls,
                                        std::uint64_t seed, int threads = 0);

void write_measurements_csv(const MeasurementSeries& series, const std::filesystem::path& path);
/// Reads the CSV and, if present, the `<stem>.meta.json` sidecar.
MeasurementSeries read_measurements_csv(const std::filesystem::path& path);
std::filesystem::path sidecar_path(const std::filesystem::path& csv_path);

}  // namespace senskit
