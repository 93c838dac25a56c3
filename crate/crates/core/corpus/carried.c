int arr[100];
#pragma omp parallel for
#pragma drs
for(int i = 0; i < 99; i++){
    arr[i] = arr[i+1] + i;
}
