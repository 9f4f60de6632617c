#pragma once

#include "errors.hpp"
#include "model.hpp"
#include "integrator.hpp"
#include "cost.hpp"
#include "adjoint.hpp"
#include "optimizer.hpp"
#include "twin.hpp"
#include "io.hpp"
#include "config.hpp"
