#pragma once

#include "fvfrac/core.hpp"
#include "fvfrac/mesh.hpp"
#include "fvfrac/cvgeom.hpp"
#include "fvfrac/fracbasis.hpp"
#include "fvfrac/solver.hpp"
#include "fvfrac/assembly.hpp"
#include "fvfrac/harness.hpp"
