int arr[100];
#pragma omp parallel for
for(int i = 0; i < 10; i++){
    arr[i] = arr[i+1];
}
