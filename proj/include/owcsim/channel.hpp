#pragma once

#include <Eigen/Dense>
#include <vector>

#include "owcsim/rng.hpp"

namespace owcsim {

// Lambertian LED / photodiode front-end parameters. Angles in degrees,
// areas in m^2, noise PSD in A^2/Hz.
struct ChannelParams {
    double semi_angle_deg = 60.0;       // LED semi-angle at half power
    double responsivity = 1.0;          // PD responsivity, A/W
    double pd_area = 1e-4;              // PD active area, m^2
    double optical_filter_gain = 0.9;
    double lens_refractive_index = 1.5;
    double lens_fov_deg = 72.0;         // lens half-angle field of view
    double noise_psd = 1e-22;           // A^2/Hz
    double bandwidth_hz = 20e6;

    double lambertian_order() const;    // -ln2 / ln(cos(semi_angle))
    double noise_power() const { return noise_psd * bandwidth_hz; }
    void validate() const;              // throws std::invalid_argument
};

// LEDs on the ceiling facing straight down, PDs on the receiving plane
// facing straight up. Every LED must sit strictly above every PD.
struct RoomGeometry {
    std::vector<Eigen::Vector3d> led_positions;
    std::vector<Eigen::Vector3d> pd_positions;

    int n_tx() const { return static_cast<int>(led_positions.size()); }
    int n_rx() const { return static_cast<int>(pd_positions.size()); }
    void validate() const;
};

// DC-gain matrix of the LOS MIMO link plus the electrical noise power
// P_n = N0 * B. Immutable after construction, safe to share across threads.
struct MimoChannel {
    Eigen::MatrixXd h;            // N_r x N_t
    double noise_power = 0.0;     // P_n
    bool full_column_rank = true;

    int n_rx() const { return static_cast<int>(h.rows()); }
    int n_tx() const { return static_cast<int>(h.cols()); }
};

// Single LOS gain between one LED and one PD. Returns 0 when the incidence
// angle exceeds the lens field of view. Throws on coincident points or a
// PD at/above the LED plane.
double lambertian_gain(const ChannelParams& params, const Eigen::Vector3d& led,
                       const Eigen::Vector3d& pd);

MimoChannel build_channel(const ChannelParams& params, const RoomGeometry& geom);

// i.i.d. zero-mean Gaussian samples with variance P_n, one row per receive
// branch: N_r x count. All randomness comes from the passed stream.
Eigen::MatrixXd sample_noise(const MimoChannel& channel, int count, RngStream& rng);

// 2x2 square grid in a horizontal plane, corners at center +- pitch/2,
// ordered (-,-), (-,+), (+,-), (+,+) in (x, y).
std::vector<Eigen::Vector3d> square_grid(const Eigen::Vector3d& center, double pitch);

// The bundled indoor layout: 5 m x 5 m x 3 m room, 2x2 LED grid with 2.5 m
// pitch at the ceiling center, 2x2 PD grid with 10 cm pitch around the
// receiver location (2, 2, 0.85).
RoomGeometry default_room_geometry();

}  // namespace owcsim
