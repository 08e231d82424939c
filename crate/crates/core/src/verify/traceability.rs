use std::fmt::Write;

/// A property of the model and the tests that pin it.
#[derive(Debug, Clone, Copy)]
pub struct TraceEntry {
    pub claim: &'static str,
    pub statement: &'static str,
    pub module: &'static str,
    /// `file::function` of each bound test.
    pub tests: &'static [&'static str],
}

pub const TRACEABILITY: &[TraceEntry] = &[
    TraceEntry {
        claim: "Skellam law of the noise",
        statement: "pmf(k; mu) = exp(-2 mu) I_|k|(2 mu); tails, quantile and cdf are consistent",
        module: "skellam",
        tests: &[
            "skellam.rs::pmf_against_double_poisson_convolution",
            "skellam.rs::survival_against_tail_sum",
            "acceptance.rs::c12_numeric_kernel",
        ],
    },
    TraceEntry {
        claim: "Y property (i)",
        statement: "[Y_1 >= y1] = I almost surely",
        module: "bridge",
        tests: &[
            "bridge/tests.rs::constraint_holds_on_both_types",
            "acceptance.rs::c01_bridge_constraint",
        ],
    },
    TraceEntry {
        claim: "Y property (ii), law",
        statement: "Y is a difference of two rate-beta Poisson processes in its own filtration",
        module: "bridge, verify",
        tests: &[
            "bridge_statistics.rs::clock_first_passage_matches_intensity_oracle",
            "bridge_statistics.rs::marginals_are_skellam",
            "bridge_statistics.rs::cancellations_match_keep_probability",
            "acceptance.rs::c02_law_preservation",
        ],
    },
    TraceEntry {
        claim: "Y property (ii), independence",
        statement: "the up and down components of Y are independent",
        module: "verify",
        tests: &[
            "verify/tests.rs::bridge_components_look_independent",
            "acceptance.rs::c03_component_independence",
        ],
    },
    TraceEntry {
        claim: "Filter identity",
        statement: "P(I | F^Y_t) = h(Y_t, t)",
        module: "verify",
        tests: &[
            "verify/tests.rs::filter_identity_on_the_bridge",
            "acceptance.rs::c04_filter_identity",
        ],
    },
    TraceEntry {
        claim: "Likelihood-ratio martingale",
        statement: "l_t = h(0,0) / h(Y_t, t) on I (and the complement off I) is a positive martingale",
        module: "law, verify",
        tests: &[
            "verify/tests.rs::martingale_probe_on_likelihood_ratio",
            "bridge_statistics.rs::compensated_counts_are_centred",
            "acceptance.rs::c05_martingale_probe",
        ],
    },
    TraceEntry {
        claim: "Lemma on the value functions",
        statement: "H and L solve their dynamic-programming systems with the stated terminal values",
        module: "equilibrium",
        tests: &[
            "equilibrium/mod.rs::difference_identity",
            "equilibrium/mod.rs::surface_residuals",
            "acceptance.rs::c06_value_function_identities",
        ],
    },
    TraceEntry {
        claim: "Upper bound on the value function",
        statement: "no admissible strategy beats H(0,0); the equilibrium attains it",
        module: "equilibrium",
        tests: &[
            "equilibrium/profit.rs::small_study_is_consistent",
            "acceptance.rs::c07_optimality",
        ],
    },
    TraceEntry {
        claim: "Equilibrium (i)",
        statement: "p^{y_delta} is a rational pricing rule",
        module: "verify",
        tests: &["acceptance.rs::c08_pricing_rationality"],
    },
    TraceEntry {
        claim: "Convergence (i), depth",
        statement: "(a^delta - p^delta) / delta converges to the Kyle-Back depth at rate O(delta)",
        module: "kyle",
        tests: &[
            "kyle/tests.rs::depth_routes_agree",
            "acceptance.rs::c09_depth_convergence",
        ],
    },
    TraceEntry {
        claim: "Convergence (i), prices and quantile",
        statement: "p^delta -> p^0 and y_delta -> y_0",
        module: "kyle",
        tests: &["acceptance.rs::c10_price_and_quantile_convergence"],
    },
    TraceEntry {
        claim: "Convergence (ii) and the lemma on cumulative orders",
        statement: "conditioned bridge laws converge weakly to the h-transformed diffusions",
        module: "kyle",
        tests: &[
            "kyle/tests.rs::high_paths_end_above_threshold",
            "kyle/tests.rs::half_time_marginal_matches_conditioned_density",
            "acceptance.rs::c11_weak_convergence",
        ],
    },
];

/// The traceability matrix as a markdown table.
pub fn traceability_markdown() -> String {
    let mut out = String::from("# Traceability matrix\n\n");
    out.push_str("Generated by `gmbridge docs traceability`. Each property lists the tests that pin it.\n\n");
    out.push_str("| Property | Statement | Module | Tests |\n|---|---|---|---|\n");
    for e in TRACEABILITY {
        let tests = e
            .tests
            .iter()
            .map(|t| format!("`{t}`"))
            .collect::<Vec<_>>()
            .join("<br>");
        writeln!(out, "| {} | {} | {} | {} |", e.claim, e.statement, e.module, tests).expect("string write");
    }
    out
}
