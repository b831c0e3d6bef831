#pragma once

// Seeded synthetic bilateral "brain" phantoms for the lesion experiment.
//
// Both subjects are an elliptical head with three Gaussian blobs per
// hemisphere placed mirror-symmetrically about the vertical mid-line, each
// with small seeded jitter. The target subject additionally has its blobs and
// outline pushed outward along x by a mirror-symmetric amount, so the true
// deformation is (approximately) reflection invariant. The lesion is a zeroed
// disk over the middle left blob of the source.

#include <cstdint>

#include "lddm/grid.hpp"

namespace lddm {

struct PhantomOptions {
    int size = 128;
    bool lesion = false;
    std::uint64_t seed = 1;
    int dilations = 8;
};

struct Phantom {
    Image source;       // lesioned when options.lesion
    Image source_clean; // same subject without the lesion
    Image target;
    Mask lesion;         // all zero without a lesion
    Mask lesion_dilated; // lesion dilated `dilations` times with a 3x3 element
    Vec2 lesion_center;  // pixel units
    double lesion_radius = 0.0;
};

// Throws Error(invalid_argument) for size < 32.
Phantom make_phantom(const PhantomOptions &options);

} // namespace lddm
