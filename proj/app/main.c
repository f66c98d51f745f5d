#include <stdio.h>

int main(void) {
    printf("demo application\n");
    return 0;
}
