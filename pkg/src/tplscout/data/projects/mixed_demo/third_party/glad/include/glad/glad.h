/*
    OpenGL loader generated by glad 0.1.36 on Mon Jan  1 00:00:00 2024.

    Language/Generator: C/C++
    Specification: gl
    APIs: gl=3.3
    Profile: core
    Extensions:
    Loader: True
    Local files: False
    Omit khrplatform: False
    Reproducible: False

    Online:
        https://glad.dav1d.de/#profile=core&language=c&specification=gl&loader=on&api=gl%3D3.3
*/

#ifndef __glad_h_
#define __glad_h_

#ifdef __cplusplus
extern "C" {
#endif

struct gladGLversionStruct {
    int major;
    int minor;
};

typedef void* (* GLADloadproc)(const char *name);

extern struct gladGLversionStruct GLVersion;
int gladLoadGL(void);
int gladLoadGLLoader(GLADloadproc);

#ifdef __cplusplus
}
#endif

#endif
