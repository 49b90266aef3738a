// Copyright 2026 The qreservoir Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Umbrella header for the simulation library (the CLI layer lives under
// qreservoir/cli and is included separately).

#pragma once

#include "qreservoir/atom_field.hpp"
#include "qreservoir/beam.hpp"
#include "qreservoir/block_propagator.hpp"
#include "qreservoir/core.hpp"
#include "qreservoir/epr.hpp"
#include "qreservoir/fock.hpp"
#include "qreservoir/lindblad.hpp"
#include "qreservoir/quadrature.hpp"
#include "qreservoir/strong_coupling.hpp"
#include "qreservoir/trajectories.hpp"
#include "qreservoir/two_cavity.hpp"
