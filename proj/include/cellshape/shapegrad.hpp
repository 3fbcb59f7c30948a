#pragma once

#include <vector>

#include "cellshape/fem.hpp"
#include "cellshape/mesh.hpp"

namespace cellshape {

/// Shape derivative as a dual vector: entry (i, c) is dJ[phi_i e_c] for the
/// P1 hat function of vertex i. The pairing with a nodal field v is the
/// directional derivative of J under x -> x + t v.
struct ShapeGradient {
  NodalField dual;
  std::vector<char> active;  ///< per vertex; empty until combine_and_reset

  double pair(const NodalField& v) const { return dual.values.dot(v.values); }
};

/// dJ_elast[phi] = -int (1/2 (sigma(u):grad u) I - grad u^T sigma(u)) : grad phi
ShapeGradient assemble_elastic_shape_derivative(const Mesh& mesh, const MaterialTable& mat,
                                                const NodalField& u);

/// dJ_vol[phi] = int_{Omega_out} div phi
ShapeGradient assemble_volume_shape_derivative(const Mesh& mesh);

/// Surface form sum over interface edges of -int v.n_cell ds. Agrees with
/// the volumetric form for fields with zero normal component on the outer
/// boundary.
double volume_derivative_surface_form(const Mesh& mesh, const NodalField& v);

/// dJ_peri[phi] = sum over interface edges of int tau . d(phi)/d(tau) ds
ShapeGradient assemble_perimeter_shape_derivative(const Mesh& mesh);

struct ShapeGradientParts {
  ShapeGradient elast;
  ShapeGradient vol;
  ShapeGradient peri;
};

/// Vertices whose star contains at least one interface edge.
std::vector<char> interface_support_mask(const Mesh& mesh);

/// Weighted sum followed by zeroing every vertex not in the interface support.
ShapeGradient combine_and_reset(const Mesh& mesh, const ShapeGradientParts& parts,
                                const ObjectiveWeights& weights);

/// Zeroes inactive vertices of an already combined gradient.
ShapeGradient reset_to_interface_support(const Mesh& mesh, ShapeGradient g);

ShapeGradientParts assemble_shape_derivative_parts(const Mesh& mesh, const MaterialTable& mat,
                                                   const NodalField& u);

}  // namespace cellshape
