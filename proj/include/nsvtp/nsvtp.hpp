#pragma once

#include "nsvtp/bytes.hpp"
#include "nsvtp/error.hpp"
#include "nsvtp/layer.hpp"

#include "nsvtp/codec/base64url.hpp"
#include "nsvtp/codec/capsule.hpp"
#include "nsvtp/codec/status_record.hpp"
#include "nsvtp/codec/tlv.hpp"
#include "nsvtp/codec/transform.hpp"

#include "nsvtp/scheme/blueprint.hpp"
#include "nsvtp/scheme/evaluate.hpp"
#include "nsvtp/scheme/expr.hpp"
#include "nsvtp/scheme/lexer.hpp"
#include "nsvtp/scheme/tweak.hpp"

#include "nsvtp/dvfs/model.hpp"
#include "nsvtp/dvfs/sweep.hpp"

#include "nsvtp/tx/exchange.hpp"

#include "nsvtp/sim/blueprints.hpp"
#include "nsvtp/sim/scenario.hpp"
#include "nsvtp/sim/simulator.hpp"
#include "nsvtp/sim/topology.hpp"
#include "nsvtp/sim/trace.hpp"
