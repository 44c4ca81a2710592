#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "survband/bands.hpp"
#include "survband/curves.hpp"
#include "survband/dataset.hpp"
#include "survband/harness.hpp"
#include "survband/hazardnet.hpp"
#include "survband/survest.hpp"

namespace survband {

// JSON serialization. Doubles are written in shortest round-trip form, so
// load(save(x)) reproduces every parameter bit for bit.
void save_net(std::ostream& out, const HazardNet& net);
HazardNet load_net(std::istream& in);

void save_baseline(std::ostream& out, const BreslowBaseline& baseline);
BreslowBaseline load_baseline(std::istream& in);

// A complete fitted ensemble-bootstrap model: enough to rebuild base, center
// and bootstrap curves for new raw covariate vectors.
struct Checkpoint {
    std::vector<std::string> feature_names;
    Standardization standardization;
    EnsembleBootstrapFit fit;
};

// Builds g functions for the stored networks. Reports are not persisted.
void save_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint load_checkpoint(std::istream& in);
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// CSV exports. Curves: t,S. Bands: t,lower,base,upper.
void write_curve_csv(std::ostream& out, const SurvCurve& curve);
void write_band_csv(std::ostream& out, const BandResult& band);

// Standalone SVG with the band shaded, the base curve and, if given, a
// reference curve on the same grid.
void write_band_svg(std::ostream& out, const BandResult& band, const SurvCurve* reference = nullptr,
                    const std::string& title = {});

// key=value sidecar written next to a simulated dataset.
struct SimulationMeta {
    int setting = 1;
    std::uint64_t seed = 0;
    std::size_t n = 0;
    std::size_t events = 0;
    double censoring_fraction = 0.0;
};

void write_simulation_meta(std::ostream& out, const SimulationMeta& meta);
SimulationMeta read_simulation_meta(std::istream& in);

}  // namespace survband
