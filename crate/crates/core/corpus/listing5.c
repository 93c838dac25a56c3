int arr[1000];
#pragma omp parallel for
#pragma drs
for(int i = 0; i < 10; i++){
    if(i < 5){
        arr[i%6+6*i] = arr[2*i];
    }
}
