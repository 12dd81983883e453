/*
 * semver.h
 *
 * Copyright (c) 2015-2017 Tomas Aparicio
 * MIT licensed
 */

#ifndef __SEMVER_H
#define __SEMVER_H

#ifdef __cplusplus
extern "C" {
#endif

#ifndef SEMVER_VERSION
#define SEMVER_VERSION "0.2.0"
#endif

typedef struct semver_version_s {
  int major;
  int minor;
  int patch;
  char * metadata;
  char * prerelease;
} semver_t;

int semver_satisfies (semver_t x, semver_t y, const char *op);
int semver_compare (semver_t x, semver_t y);
int semver_parse (const char *str, semver_t *ver);
int semver_parse_version (const char *str, semver_t *ver);
void semver_render (semver_t *x, char *dest);
void semver_bump (semver_t *x);
void semver_free (semver_t *x);

#ifdef __cplusplus
}
#endif

#endif
