#pragma once

#include "cqc/attack.hpp"
#include "cqc/errors.hpp"
#include "cqc/imperfections.hpp"
#include "cqc/json_io.hpp"
#include "cqc/keyrate.hpp"
#include "cqc/montecarlo.hpp"
#include "cqc/protocol.hpp"
#include "cqc/solve.hpp"
#include "cqc/types.hpp"
