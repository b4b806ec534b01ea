#pragma once

#include "demonforge/protocol.hpp"

#include <string>
#include <vector>

namespace demonforge::demos {

/// Names accepted by the CLI demo command.
const std::vector<std::string>& names();

/// Single-qubit Szilard engine embedded at d_B = 1: maximally mixed start,
/// projective readout, spin-flip feedback into a gapped final Hamiltonian.
Scenario szilard_qubit(double beta = 1.0, double gap = 20.0);

/// Bell pair (degenerate thermal entangled state), projective measurement on
/// A, flip-flip local feedback into gapped final Hamiltonians.
Scenario bell_local(double beta = 1.0, double gap = 20.0);

/// Same, with the feedback performed by joint unitaries |kk> -> |00>.
Scenario bell_nonlocal(double beta = 1.0, double gap = 20.0);

/// Dephased twin of bell_local: same marginals, classical correlation only.
Scenario classical_correlated(double beta = 1.0, double gap = 20.0);

/// Non-degenerate thermal entangled state at inverse temperature beta with
/// level spacing `gap` on both subsystems.
Scenario thermal_entangled(double beta = 1.0, double gap = 1.0);

/// Bell pair measured weakly in round one (readout rotated by `angle`),
/// then projectively on B in round two.
Scenario locc_two_round(double beta = 1.0, double angle = M_PI / 3.0);

/// Szilard twin with an explicit erasure unitary: the memory qubit is
/// swapped with the cold first qubit of a four-level bath.
Scenario finite_bath_erasure(double beta = 1.0, double bath_gap = 20.0);

/// Lookup by CLI name; beta/gap/angle map onto the scenario's parameters.
Scenario by_name(const std::string& name, double beta, double gap, double angle);

/// Dilation of a sharpness-`angle` qubit measurement: CNOT onto the memory
/// followed by a rotation of the readout basis; angle 0 is projective,
/// angle pi/2 measures nothing.
ComplexMatrix partial_readout_dilation(double angle);

}  // namespace demonforge::demos
