#pragma once

#include "nesylab/checkpoint.hpp"
#include "nesylab/losses.hpp"
#include "nesylab/nets.hpp"
