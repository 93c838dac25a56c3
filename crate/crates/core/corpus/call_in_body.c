int arr[100];
int f(int x) { return x; }
#pragma omp parallel for
#pragma drs
for(int i = 0; i < 10; i++){
    arr[i] = f(i);
}
