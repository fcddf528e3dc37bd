#include "owcsim/channel.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace owcsim {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
}  // namespace

double ChannelParams::lambertian_order() const {
    return -std::log(2.0) / std::log(std::cos(deg2rad(semi_angle_deg)));
}

void ChannelParams::validate() const {
    if (!(semi_angle_deg > 0.0 && semi_angle_deg < 90.0))
        throw std::invalid_argument("semi_angle_deg must be in (0, 90)");
    if (!(lens_fov_deg > 0.0 && lens_fov_deg <= 90.0))
        throw std::invalid_argument("lens_fov_deg must be in (0, 90]");
    if (!(responsivity > 0.0)) throw std::invalid_argument("responsivity must be > 0");
    if (!(pd_area > 0.0)) throw std::invalid_argument("pd_area must be > 0");
    if (!(noise_psd > 0.0)) throw std::invalid_argument("noise_psd must be > 0");
    if (!(bandwidth_hz > 0.0)) throw std::invalid_argument("bandwidth_hz must be > 0");
    if (!(lens_refractive_index >= 1.0))
        throw std::invalid_argument("lens_refractive_index must be >= 1");
    double l = lambertian_order();
    if (!(std::isfinite(l) && l > 0.0))
        throw std::invalid_argument("Lambertian order is not finite and positive");
}

void RoomGeometry::validate() const {
    if (led_positions.empty()) throw std::invalid_argument("no LED positions");
    if (pd_positions.empty()) throw std::invalid_argument("no PD positions");
    for (const auto& led : led_positions)
        for (const auto& pd : pd_positions)
            if (!(led.z() > pd.z()))
                throw std::invalid_argument("every LED must sit strictly above every PD");
}

double lambertian_gain(const ChannelParams& params, const Eigen::Vector3d& led,
                       const Eigen::Vector3d& pd) {
    const double dx = led.x() - pd.x();
    const double dy = led.y() - pd.y();
    const double dz = led.z() - pd.z();
    const double d2 = (dx * dx + dy * dy) + dz * dz;
    if (d2 == 0.0) throw std::invalid_argument("coincident LED and PD");
    if (!(dz > 0.0)) throw std::invalid_argument("LED not above PD plane");

    const double d = std::sqrt(d2);
    // LED faces straight down, PD straight up: emission and incidence angles
    // are both measured against the vertical and coincide.
    const double cos_phi = dz / d;
    const double cos_theta = cos_phi;
    const double theta = std::acos(cos_theta);
    if (theta > deg2rad(params.lens_fov_deg)) return 0.0;

    const double l = params.lambertian_order();
    const double lens_gain = params.lens_refractive_index * params.lens_refractive_index /
                             std::pow(std::sin(deg2rad(params.lens_fov_deg)), 2);
    return (l + 1.0) * params.responsivity * params.pd_area / (2.0 * kPi * d2) *
           std::pow(cos_phi, l) * params.optical_filter_gain * lens_gain * cos_theta;
}

MimoChannel build_channel(const ChannelParams& params, const RoomGeometry& geom) {
    params.validate();
    geom.validate();

    MimoChannel channel;
    channel.h.resize(geom.n_rx(), geom.n_tx());
    for (int r = 0; r < geom.n_rx(); ++r)
        for (int t = 0; t < geom.n_tx(); ++t)
            channel.h(r, t) = lambertian_gain(params, geom.led_positions[t],
                                              geom.pd_positions[r]);
    channel.noise_power = params.noise_power();

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(channel.h);
    channel.full_column_rank = qr.rank() == channel.h.cols();
    if (!channel.full_column_rank)
        std::fprintf(stderr,
                     "warning: channel matrix is column-rank deficient; "
                     "zero-forcing equalization will fail\n");
    return channel;
}

Eigen::MatrixXd sample_noise(const MimoChannel& channel, int count, RngStream& rng) {
    if (count <= 0) throw std::invalid_argument("sample count must be > 0");
    const double sigma = std::sqrt(channel.noise_power);
    Eigen::MatrixXd out(channel.n_rx(), count);
    for (int c = 0; c < count; ++c)
        for (int r = 0; r < channel.n_rx(); ++r) out(r, c) = sigma * rng.gaussian();
    return out;
}

std::vector<Eigen::Vector3d> square_grid(const Eigen::Vector3d& center, double pitch) {
    const double h = pitch / 2.0;
    return {center + Eigen::Vector3d(-h, -h, 0.0), center + Eigen::Vector3d(-h, h, 0.0),
            center + Eigen::Vector3d(h, -h, 0.0), center + Eigen::Vector3d(h, h, 0.0)};
}

RoomGeometry default_room_geometry() {
    RoomGeometry geom;
    geom.led_positions = square_grid({2.5, 2.5, 3.0}, 2.5);
    geom.pd_positions = square_grid({2.0, 2.0, 0.85}, 0.1);
    return geom;
}

}  // namespace owcsim
