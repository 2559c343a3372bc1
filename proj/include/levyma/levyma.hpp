#pragma once

#include "levyma/acf.hpp"
#include "levyma/asymptotics.hpp"
#include "levyma/diagnostics.hpp"
#include "levyma/drivers.hpp"
#include "levyma/errors.hpp"
#include "levyma/estimate.hpp"
#include "levyma/io.hpp"
#include "levyma/kernels.hpp"
#include "levyma/lattice.hpp"
#include "levyma/quadrature.hpp"
#include "levyma/rng.hpp"
#include "levyma/simulate.hpp"
#include "levyma/study.hpp"
