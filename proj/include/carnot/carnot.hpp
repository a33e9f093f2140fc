#pragma once

#include "carnot/algebra.hpp"
#include "carnot/atlas.hpp"
#include "carnot/bch.hpp"
#include "carnot/catalog.hpp"
#include "carnot/definition_file.hpp"
#include "carnot/derivate.hpp"
#include "carnot/distance.hpp"
#include "carnot/divergence.hpp"
#include "carnot/group.hpp"
#include "carnot/measure.hpp"
#include "carnot/optimizer.hpp"
#include "carnot/path.hpp"
#include "carnot/random.hpp"
#include "carnot/report.hpp"
