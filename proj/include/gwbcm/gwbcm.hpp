#pragma once

// Gromov-Wasserstein barycentric coding: synthesis of GW barycenters and
// recovery of their simplex coordinates, via fixed-point and blow-up routes.

#include "gwbcm/analysis.hpp"
#include "gwbcm/blowup.hpp"
#include "gwbcm/dataio.hpp"
#include "gwbcm/errors.hpp"
#include "gwbcm/gw_solver.hpp"
#include "gwbcm/linear_ot.hpp"
#include "gwbcm/mds.hpp"
#include "gwbcm/network.hpp"
#include "gwbcm/pipeline.hpp"
#include "gwbcm/simplex_qp.hpp"
#include "gwbcm/synthesis.hpp"
