#pragma once

#include "lexbias/corpus.hpp"
#include "lexbias/featstats.hpp"
#include "lexbias/io.hpp"
#include "lexbias/permtest.hpp"
#include "lexbias/probe.hpp"
#include "lexbias/reweight.hpp"
#include "lexbias/synth.hpp"
