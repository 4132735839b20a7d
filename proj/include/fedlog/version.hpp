#pragma once

#define FEDLOG_VERSION_MAJOR 0
#define FEDLOG_VERSION_MINOR 1
#define FEDLOG_VERSION_PATCH 0
#define FEDLOG_VERSION "0.1.0"
