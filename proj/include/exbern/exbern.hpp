#pragma once

#include "exbern/decay.hpp"
#include "exbern/elliptic.hpp"
#include "exbern/error.hpp"
#include "exbern/expansion.hpp"
#include "exbern/grid.hpp"
#include "exbern/nonlinear.hpp"
#include "exbern/qcmap.hpp"
#include "exbern/snapshot.hpp"
#include "exbern/types.hpp"
