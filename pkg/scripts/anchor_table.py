"""Print the check-to-code table used in the README (regenerate after adding a check)."""
from dqlab.verify import REGISTRY

CODE = {
    "connection_invariants": "CompatibleStructure.christoffel_lc / christoffel_sympl / christoffel_chern",
    "ricci_equals_ric": "CompatibleStructure.hermitian_ricci, ricci_form",
    "scalar_formulas": "CompatibleStructure.hermitian_scalar, hermitian_scalar_wedge",
    "frame_independence": "CompatibleStructure.hermitian_ricci_complex",
    "first_variation": "CompatibleStructure.first_variation_levi_civita",
    "cor_variation": "CompatibleStructure.variation_hermitian_ricci",
    "equivariance_ricci": "CompatibleStructure.variation_hermitian_ricci, lie_derivative_J",
    "lemma_formula": "CompatibleStructure.delta_endo, geometry.trace_prod",
    "lemma_formula_half": "CompatibleStructure.delta_endo, geometry.trace_prod",
    "lemma_exact_laplacian": "moment.exact_laplacian_form, CompatibleStructure.laplacian",
    "lemma_ddto_laplacian": "CompatibleStructure.laplacian, moved",
    "lemma_delta": "CompatibleStructure.conjugated, delta_endo",
    "moyal_oracle": "fedosov.flat_fedosov, FedosovData.star, fedosov.moyal_star",
    "fedosov_r_equation": "fedosov.solve_r, FedosovData.curvature_equation_residual",
    "fedosov_d_squared": "FedosovData.D_apply",
    "fedosov_dq": "FedosovData.Q, D_apply",
    "fedosov_sigma_q": "FedosovData.Q",
    "star_associativity": "FedosovData.star",
    "star_poisson": "FedosovData.star_commutator",
    "q_hamiltonian": "moment.q_hamiltonian_oracle",
    "r_leading": "moment.curvature_element",
    "curvature_flat": "moment.curvature_element, FedosovData.D_apply",
    "curvature_antisymmetry": "moment.curvature_element",
    "trace_holdout": "moment.trace_density, trace_defects",
    "density_order1": "moment.trace_density",
    "density_order1_half": "moment.trace_density",
    "mu_order_minus1": "moment.mu",
    "mu_order0": "moment.mu, mu_classical",
    "mu_order0_double": "moment.mu, mu_classical",
    "df_order0": "moment.df_order0",
    "moment_order0": "moment.moment_order0",
    "kahler_order1": "moment.moment_residual, mu_tilde, omega_tilde_from",
    "trace_variation": "moment.trace_variation, alpha",
    "omega_tilde_order0": "moment.omega_tilde_from, omega_classical",
    "omega_tilde_antisymmetry": "moment.omega_tilde_from",
    "flat_mu_tilde": "moment.mu_tilde",
}


def main():
    print("| check | statement | code | tol | dims |")
    print("|---|---|---|---|---|")
    for name, chk in REGISTRY.items():
        dims = ",".join(map(str, chk.dims))
        print(f"| `{name}` | {chk.anchor} | `{CODE.get(name, '?')}` | {chk.tolerance:g} | {dims} |")


if __name__ == "__main__":
    main()
