// Copyright (c) 2026 spdcsim contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "spdcsim/core.hpp"
#include "spdcsim/crystal.hpp"
#include "spdcsim/fft.hpp"
#include "spdcsim/field.hpp"
#include "spdcsim/grid.hpp"
#include "spdcsim/io.hpp"
#include "spdcsim/measurement.hpp"
#include "spdcsim/observables.hpp"
#include "spdcsim/pump.hpp"
#include "spdcsim/rng.hpp"
#include "spdcsim/scenario.hpp"
#include "spdcsim/special.hpp"
#include "spdcsim/state.hpp"
#include "spdcsim/tailor.hpp"
