#pragma once

#include <string>

#include "gc/body.hpp"
#include "gc/mesh.hpp"

namespace gc {

// Analytic quasi-static garment: gravity-aligned ring cross-sections offset
// from the body surface by offset + flare * drop, lofted into an open
// triangle-strip surface. Stands in for simulated cloth at desk scale.
struct GarmentStyle {
    enum Kind { kSkirt = 0, kDress = 1, kPants = 2, kTop = 3 };
    Kind kind = kSkirt;
    double flare = 0.15;         // radial growth per meter of drop, >= 0
    double length = 0.8;         // covered fraction of the region, [0.2, 1.0]
    double offset = 0.02;        // base distance from the body surface, > 0
    double waist_height = 1.0;   // waist line as a fraction of pelvis height

    void validate() const;
    static const char* kind_name(Kind k);
    static Kind kind_from_name(const std::string& name);
};

TriMesh synth_garment(const GarmentStyle& style, const PosedBody& body);

// Largest drop (meters) the style produces on this body; the expected offset
// band of garment points is [offset, offset + flare * max_drop].
double garment_max_drop(const GarmentStyle& style, const PosedBody& body);

}  // namespace gc
