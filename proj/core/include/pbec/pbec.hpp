#pragma once

#include "pbec/coherence.hpp"
#include "pbec/constants.hpp"
#include "pbec/equilibrium.hpp"
#include "pbec/errors.hpp"
#include "pbec/microlaser.hpp"
#include "pbec/noneq.hpp"
#include "pbec/numerics.hpp"
#include "pbec/physics.hpp"
