/*
    OpenGL loader generated by glad 0.1.36 on Mon Jan  1 00:00:00 2024.

    Language/Generator: C/C++
    Specification: gl
    APIs: gl=3.3
    Profile: core
*/

#include <stdio.h>
#include <string.h>
#include <glad/glad.h>

struct gladGLversionStruct GLVersion = { 0, 0 };

static int find_coreGL(void) {
    GLVersion.major = 3;
    GLVersion.minor = 3;
    return 1;
}

int gladLoadGLLoader(GLADloadproc load) {
    if (load == NULL) return 0;
    if (load("glGetString") == NULL) return 0;
    return find_coreGL();
}

int gladLoadGL(void) {
    return 0;
}
