// Stand-in: the original case is not reprinted. A branch whose
// condition can never hold on the iteration range guards a carried write.
int size = 100;
int limit = 50;
int arr[size];

#pragma omp parallel for
#pragma drs
for(int i = 0; i < 40; i++){
    if(i > limit){
        arr[i] = arr[i-1] + 1;
    }
}
