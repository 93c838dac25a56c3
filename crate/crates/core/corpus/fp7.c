int arr[1000];

#pragma omp parallel for
#pragma drs
for(int i = 0; i < 10; i++){
    if(i*i*i >= 1000){
        arr[i%2] = i;
    }
}
